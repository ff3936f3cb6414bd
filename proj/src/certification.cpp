#include "gradflow/certification.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "gradflow/errors.hpp"

namespace gradflow {

void LyapunovConstants::validate() const {
  if (!(d1 > 0.0 && d2 > 0.0 && d3 > 0.0 && d4 > 0.0 && d5 > 0.0 && d6 >= 0.0)) {
    throw CertificationError("Lyapunov constants d1..d5 must be positive (d6 nonnegative)");
  }
  if (d1 > d2) throw CertificationError("Lyapunov constants require d1 <= d2");
}

Mat solve_lyapunov(const Mat& A, const Mat& Q) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n) {
    throw ConfigError("solve_lyapunov: A and Q must be square of equal size");
  }
  // vec(A^T P + P A) = (I kron A^T + A^T kron I) vec(P)
  Mat K = Mat::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < n; ++k) {
        K(i * n + j, i * n + k) += A(k, j);  // P A term
        K(i * n + j, k * n + j) += A(k, i);  // A^T P term
      }
    }
  }
  Vec q(n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) q(i * n + j) = Q(i, j);
  }
  const Vec p = K.fullPivLu().solve(q);
  Mat P(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) P(i, j) = p(i * n + j);
  }
  return 0.5 * (P + P.transpose());
}

LyapunovConstants lti_lyapunov_constants(const Mat& A, const Mat& B, const Mat& E) {
  const Eigen::Index n = A.rows();
  const Eigen::EigenSolver<Mat> eig(A);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(eig.eigenvalues()(i).real() < 0.0)) {
      std::ostringstream os;
      os << "lti_lyapunov_constants: A is not Hurwitz (eigenvalue real part "
         << eig.eigenvalues()(i).real() << ")";
      throw CertificationError(os.str());
    }
  }
  const Mat P = solve_lyapunov(A, -Mat::Identity(n, n));
  const Eigen::SelfAdjointEigenSolver<Mat> pe(P);
  const double lam_min = pe.eigenvalues().minCoeff();
  const double lam_max = pe.eigenvalues().maxCoeff();
  if (!(lam_min > 0.0)) {
    throw CertificationError("lti_lyapunov_constants: Lyapunov solution is not positive definite");
  }

  const Mat Ainv = A.fullPivLu().inverse();
  const double l_hu = (-Ainv * B).jacobiSvd().singularValues()(0);
  const double l_hw =
      E.size() == 0 ? 0.0 : (-Ainv * E).jacobiSvd().singularValues()(0);

  LyapunovConstants d;
  d.d1 = lam_min;
  d.d2 = lam_max;
  d.d3 = 1.0;  // d/dt W along f equals -||x - h||^2 by construction
  d.d4 = 2.0 * lam_max;
  // W depends on u, w only through h; the chain rule through the affine map
  // is exact for the quadratic W.
  d.d5 = d.d4 * l_hu;
  d.d6 = d.d4 * l_hw;
  d.provenance = "analytic-lti";
  return d;
}

void CertificateInputs::validate() const {
  lyapunov.validate();
  if (!(mu > 0.0)) throw CertificationError("certificate requires mu > 0");
  if (!(ell > 0.0)) throw CertificationError("certificate requires ell > 0");
  if (!(ell_y > 0.0)) throw CertificationError("certificate requires ell_y > 0");
  if (!(l_hu > 0.0)) throw CertificationError("certificate requires l_hu > 0");
  if (l_hw < 0.0 || l_j < 0.0) {
    throw CertificationError("certificate requires nonnegative l_hw and l_J");
  }
  if (!(s > 0.0 && s < 1.0)) throw CertificationError("certificate requires s in (0, 1)");
}

double eta_star(const CertificateInputs& in) {
  in.validate();
  const double first = 2.0 * in.mu / (in.ell * in.ell);
  const double one_minus_s = 1.0 - in.s;
  const double numerator = one_minus_s * one_minus_s * in.lyapunov.d3 * in.mu;
  const double denominator =
      in.l_hu * (in.lyapunov.d4 * in.l_hu + in.lyapunov.d5) *
      (one_minus_s * in.mu * in.ell_y + 2.0 * in.ell * in.ell);
  return std::min(first, numerator / denominator);
}

IssConstants iss_constants(const CertificateInputs& in, double eta, double gamma) {
  in.validate();
  const double ceiling = eta_star(in);
  if (!(eta > 0.0) || eta >= ceiling) {
    std::ostringstream os;
    os << "gain eta = " << eta << " is outside the certified range (0, " << ceiling
       << "); the transient bound does not apply";
    throw CertificationError(os.str());
  }
  if (gamma < 0.0) throw CertificationError("gamma must be nonnegative");

  IssConstants c;
  c.theta = 1.0 / (1.0 + in.lyapunov.d4 + in.lyapunov.d5 / (in.ell * in.l_hu));
  c.c0 = std::min(in.s * in.mu * eta, in.s * in.lyapunov.d3 / in.lyapunov.d2);
  c.c1 = std::min(0.5 * (1.0 - c.theta), c.theta * in.lyapunov.d1) / eta;
  c.c2 = std::max(0.5 * (1.0 - c.theta), c.theta * in.lyapunov.d2) / eta;
  c.c3 = std::sqrt(2.0) / c.c1;
  c.c4 = std::sqrt(2.0 * eta) * std::max(1.0, 1.0 / std::sqrt(in.lyapunov.d1));
  c.c5 = std::sqrt(2.0) * in.l_j / std::sqrt(eta) +
         in.lyapunov.d4 * in.l_hw / (std::sqrt(eta) * std::sqrt(in.lyapunov.d1));
  c.kappa1 = std::sqrt(c.c2 / c.c1);
  c.kappa2 = c.c5 / (c.c0 * std::sqrt(c.c1));
  c.kappa3 = c.c4 / (c.c0 * std::sqrt(c.c1));
  if (gamma >= c.c0 / c.c3) {
    std::ostringstream os;
    os << "vanishing-error gain gamma = " << gamma << " is not below c0/c3 = "
       << c.c0 / c.c3 << "; no exponential rate remains";
    throw CertificationError(os.str());
  }
  c.alpha = c.c0 - gamma * c.c3;
  return c;
}

IssCertificate make_certificate(const CertificateInputs& inputs, double eta, double gamma,
                                double delta, double ess_sup_wdot, double diam_u,
                                std::uint64_t instance_hash) {
  IssCertificate cert;
  cert.inputs = inputs;
  cert.eta = eta;
  cert.gamma = gamma;
  cert.eta_ceiling = eta_star(inputs);
  cert.constants = iss_constants(inputs, eta, gamma);
  cert.delta = delta;
  cert.ess_sup_wdot = ess_sup_wdot;
  cert.diam_u = diam_u;
  cert.instance_hash = instance_hash;
  cert.lyapunov_provenance = inputs.lyapunov.provenance;
  // r' < r0/(sqrt(2) kappa1) - sqrt(2) kappa3 delta - sqrt(2) kappa2 esssup
  //      - sqrt(2) kappa1 diam(U); may come out nonpositive, in which case the
  // initial-condition region is empty and a warning is appropriate.
  const double sqrt2 = std::sqrt(2.0);
  cert.region_radius = inputs.r0 / (sqrt2 * cert.constants.kappa1) -
                       sqrt2 * cert.constants.kappa3 * delta -
                       sqrt2 * cert.constants.kappa2 * ess_sup_wdot -
                       sqrt2 * cert.constants.kappa1 * diam_u;
  return cert;
}

double tracking_bound(const IssCertificate& cert, double elapsed, double z0_norm,
                      double ess_sup_wdot, double delta) {
  if (!(cert.constants.alpha > 0.0)) {
    throw CertificationError("tracking_bound: certificate has no positive rate alpha");
  }
  if (elapsed < 0.0) throw ConfigError("tracking_bound: elapsed time must be nonnegative");
  return cert.constants.kappa1 * std::exp(-0.5 * cert.constants.alpha * elapsed) * z0_norm +
         cert.constants.kappa2 * ess_sup_wdot + cert.constants.kappa3 * delta;
}

std::string to_string(DeltaMode mode) {
  switch (mode) {
    case DeltaMode::kStateResnet: return "state_resnet";
    case DeltaMode::kStateFeedforward: return "state_feedforward";
    case DeltaMode::kCostFeedforward: return "cost_feedforward";
    case DeltaMode::kCostResnet: return "cost_resnet";
  }
  return "unknown";
}

DeltaMode delta_mode_from_string(const std::string& name) {
  if (name == "state_resnet") return DeltaMode::kStateResnet;
  if (name == "state_feedforward") return DeltaMode::kStateFeedforward;
  if (name == "cost_feedforward") return DeltaMode::kCostFeedforward;
  if (name == "cost_resnet") return DeltaMode::kCostResnet;
  throw ConfigError("unknown delta budget mode '" + name + "'");
}

double delta_budget(DeltaMode mode, const DeltaBudgetInputs& in) {
  const auto require_nonnegative = [](double v, const char* what) {
    if (v < 0.0) throw ConfigError(std::string("delta_budget: ") + what + " must be nonnegative");
  };
  require_nonnegative(in.sup_state_error, "sup state error");
  require_nonnegative(in.omega_p, "omega_p");
  require_nonnegative(in.sup_phi_error, "sup phi error");
  require_nonnegative(in.sup_psi_error, "sup psi error");
  require_nonnegative(in.e_u_fd, "e_u_fd");
  require_nonnegative(in.e_x_fd, "e_x_fd");

  switch (mode) {
    case DeltaMode::kStateResnet:
      return in.l_hu * in.ell_x * std::sqrt(static_cast<double>(in.n_xi)) *
             (3.0 * in.sup_state_error + 2.0 * in.omega_p + 2.0 * in.a_inf_norm * in.rho);
    case DeltaMode::kStateFeedforward:
      return in.l_hu * in.ell_x * std::sqrt(static_cast<double>(in.n)) * in.sup_state_error;
    case DeltaMode::kCostFeedforward: {
      if (!(in.epsilon > 0.0)) throw ConfigError("delta_budget: epsilon must be > 0");
      const double nu = static_cast<double>(in.n_u);
      const double n = static_cast<double>(in.n);
      return in.e_u_fd + nu / in.epsilon * in.sup_phi_error + in.l_hu * in.e_x_fd +
             n / in.epsilon * in.l_hu * in.sup_psi_error;
    }
    case DeltaMode::kCostResnet: {
      if (!(in.epsilon > 0.0)) throw ConfigError("delta_budget: epsilon must be > 0");
      // The residual-network variant carries an extra sqrt(dim) from the
      // sup-norm lift relative to the feedforward variant.
      const double nu = static_cast<double>(in.n_u);
      const double n = static_cast<double>(in.n);
      return in.e_u_fd +
             std::pow(nu, 1.5) / in.epsilon *
                 (3.0 * in.sup_phi_error + 2.0 * in.omega_phi + 2.0 * in.a_u_inf_norm) +
             in.l_hu * in.e_x_fd +
             std::pow(n, 1.5) / in.epsilon * in.l_hu *
                 (3.0 * in.sup_psi_error + 2.0 * in.omega_psi + 2.0 * in.a_x_inf_norm);
    }
  }
  throw ConfigError("delta_budget: unhandled mode");
}

BoundReport verify_bound(const Trajectory& trajectory, const IssCertificate& cert,
                         double delta, double ess_sup_wdot) {
  if (cert.instance_hash != 0 && trajectory.config_hash != 0 &&
      cert.instance_hash != trajectory.config_hash) {
    throw ConfigError("verify_bound: trajectory and certificate come from different instances");
  }
  BoundReport report;
  if (trajectory.times.empty()) {
    report.holds = true;
    report.vacuous = true;
    return report;
  }
  const double t0 = trajectory.times.front();
  const double z0 = trajectory.tracking_error.front();
  constexpr double kSlack = 1e-9;
  report.holds = true;
  report.max_violation = -std::numeric_limits<double>::infinity();
  report.margin.reserve(trajectory.size());
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const double envelope =
        tracking_bound(cert, trajectory.times[i] - t0, z0, ess_sup_wdot, delta);
    const double violation = trajectory.tracking_error[i] - envelope;
    report.margin.push_back(-violation);
    report.max_violation = std::max(report.max_violation, violation);
    if (violation > kSlack) report.holds = false;
  }
  return report;
}

void attach_bound(Trajectory& trajectory, const IssCertificate& cert, double delta,
                  double ess_sup_wdot) {
  trajectory.bound.clear();
  if (trajectory.times.empty()) return;
  const double t0 = trajectory.times.front();
  const double z0 = trajectory.tracking_error.front();
  trajectory.bound.reserve(trajectory.size());
  for (const double t : trajectory.times) {
    trajectory.bound.push_back(tracking_bound(cert, t - t0, z0, ess_sup_wdot, delta));
  }
}

}  // namespace gradflow
