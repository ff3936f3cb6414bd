#pragma once

#include <string>

#include "gradflow/controller.hpp"
#include "gradflow/numerics.hpp"

namespace gradflow {

// Quadratic-bound and partial-derivative constants of the converse Lyapunov
// function W for the plant.
struct LyapunovConstants {
  double d1 = 0.0, d2 = 0.0, d3 = 0.0, d4 = 0.0, d5 = 0.0, d6 = 0.0;
  std::string provenance = "user-supplied";  // or analytic-lti / local-surrogate

  void validate() const;
};

// W = (x - h)^T P (x - h) with A^T P + P A = -I; exact for f = Ax + Bu + Ew.
LyapunovConstants lti_lyapunov_constants(const Mat& A, const Mat& B, const Mat& E);

// Solves A^T P + P A = Q for symmetric P (dense Kronecker path, desk scale).
Mat solve_lyapunov(const Mat& A, const Mat& Q);

// Everything the gain ceiling and the tracking bound need.
struct CertificateInputs {
  double mu = 0.0;     // strong convexity of the composite cost
  double ell = 0.0;    // smoothness of the composite cost
  double ell_y = 0.0;  // gradient constant in the gain ceiling (defaults to ell_x)
  double l_hu = 0.0;
  double l_hw = 0.0;
  double l_j = 0.0;    // optimal-trajectory map sensitivity (typically empirical)
  LyapunovConstants lyapunov;
  double s = 0.5;      // free analysis parameter in (0, 1)
  double r0 = 1.0;     // stability region radius of the plant

  void validate() const;
};

struct IssConstants {
  double c0 = 0, c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0;
  double theta = 0;
  double kappa1 = 0, kappa2 = 0, kappa3 = 0;
  double alpha = 0;  // c0 - gamma * c3
};

// Gain ceiling eta*.
double eta_star(const CertificateInputs& inputs);

// Certificate constants for a gain below the ceiling. Refuses eta >= eta*
// and gamma >= c0/c3 (the exponential rate would vanish).
IssConstants iss_constants(const CertificateInputs& inputs, double eta, double gamma = 0.0);

struct IssCertificate {
  CertificateInputs inputs;
  double eta = 0.0;
  double gamma = 0.0;
  double eta_ceiling = 0.0;
  IssConstants constants;
  double delta = 0.0;          // gradient-error budget attached to this instance
  double ess_sup_wdot = 0.0;
  double region_radius = 0.0;  // r' of the admissible initial-condition region
  double diam_u = 0.0;
  std::uint64_t instance_hash = 0;  // plant/cost configuration this was built for
  std::string lyapunov_provenance;
  std::string lj_provenance = "empirical";
  std::string ell_y_source = "ell_x-default";
};

IssCertificate make_certificate(const CertificateInputs& inputs, double eta, double gamma,
                                double delta, double ess_sup_wdot, double diam_u,
                                std::uint64_t instance_hash);

// Envelope value kappa1 e^{-alpha/2 elapsed} ||z0|| + kappa2 esssup + kappa3 delta.
double tracking_bound(const IssCertificate& cert, double elapsed, double z0_norm,
                      double ess_sup_wdot, double delta);

// --- Gradient-error budgets -------------------------------------------------

enum class DeltaMode {
  kStateResnet,       // state perception, residual network
  kStateFeedforward,  // state perception, feedforward network
  kCostFeedforward,   // cost perception, feedforward networks
  kCostResnet,        // cost perception, residual networks
};

std::string to_string(DeltaMode mode);
DeltaMode delta_mode_from_string(const std::string& name);

struct DeltaBudgetInputs {
  // State perception terms.
  double sup_state_error = 0.0;  // sup-norm perception error on the samples/set
  double omega_p = 0.0;          // modulus of continuity of p at the cover radius
  double a_inf_norm = 0.0;       // ||A||_inf of the residual decomposition
  double rho = 0.0;              // cover radius
  Eigen::Index n_xi = 0;         // observation dimension
  Eigen::Index n = 0;            // state dimension
  double l_hu = 0.0;
  double ell_x = 0.0;

  // Cost perception terms.
  double e_u_fd = 0.0;           // centered-difference bound for phi
  double e_x_fd = 0.0;           // centered-difference bound for psi
  double sup_phi_error = 0.0;    // sup |phi - phi_hat|
  double sup_psi_error = 0.0;    // sup |psi - psi_hat|
  double epsilon = 0.0;
  Eigen::Index n_u = 0;
  double omega_phi = 0.0;        // residual variants
  double omega_psi = 0.0;
  double a_u_inf_norm = 0.0;
  double a_x_inf_norm = 0.0;
  double rho_u = 0.0;
  double rho_x = 0.0;
};

double delta_budget(DeltaMode mode, const DeltaBudgetInputs& inputs);

// --- Empirical envelope verification ---------------------------------------

struct BoundReport {
  bool holds = false;
  bool vacuous = false;      // zero-length trajectory
  double max_violation = 0.0;  // max(err - envelope), <= 0 when the bound holds
  std::vector<double> margin;  // envelope - err per sample
};

// Compares ||z(t)|| against the certified envelope anchored at the first
// sample; numeric slack 1e-9. Refuses mismatched plant/cost instances.
BoundReport verify_bound(const Trajectory& trajectory, const IssCertificate& cert,
                         double delta, double ess_sup_wdot);

// Fills trajectory.bound with the envelope values.
void attach_bound(Trajectory& trajectory, const IssCertificate& cert, double delta,
                  double ess_sup_wdot);

}  // namespace gradflow
