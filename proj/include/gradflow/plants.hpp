#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "gradflow/numerics.hpp"

namespace gradflow {

// Lipschitz constants of the vector field and the steady-state map pieces.
struct LipschitzRecord {
  double l_hu = 0.0;  // steady-state map, input component
  double l_hw = 0.0;  // steady-state map, disturbance component
  double L_x = 0.0;
  double L_u = 0.0;
  double L_w = 0.0;
};

// Exponential stability envelope of the open-loop plant for frozen inputs.
struct StabilityRecord {
  double decay_rate = 0.0;  // a
  double overshoot = 1.0;   // k
};

// A plant with a unique exponentially stable equilibrium per frozen (u, w),
// whose steady-state map splits as h(u, w) = h_u(u) + h_w(w).
struct PlantSpec {
  Eigen::Index n = 0;    // state dimension
  Eigen::Index n_u = 0;  // input dimension
  Eigen::Index n_w = 0;  // disturbance dimension

  std::function<Vec(const Vec& x, const Vec& u, const Vec& w)> field;
  std::function<Vec(const Vec& u)> h_u;
  std::function<Vec(const Vec& w)> h_w;
  std::function<Mat(const Vec& u)> input_jacobian;  // H(u), n x n_u

  LipschitzRecord lipschitz;
  StabilityRecord stability;

  // State coordinates entering the tracking error; empty means all of them.
  // (The stabilized unicycle excludes its free equilibrium orientation.)
  std::vector<Eigen::Index> tracked_indices;

  std::string name;

  Vec steady_state(const Vec& u, const Vec& w) const { return h_u(u) + h_w(w); }
  std::vector<Eigen::Index> tracked() const;
  Vec select_tracked(const Vec& x) const;
};

// f = Ax + Bu + Ew with A Hurwitz. Rejects non-Hurwitz A naming the
// offending eigenvalue.
PlantSpec lti_plant(const Mat& A, const Mat& B, const Mat& E);

struct SisParameters {
  double beta = 4.0;          // transmission rate
  double gamma = 1.0 / 9.0;   // recovery rate
  double mu = 1e-4;           // birth/death rate

  double ratio() const { return (mu + gamma) / beta; }
  // Transformed input box [1, margin * beta/(mu+gamma)]; the margin keeps the
  // equilibrium in the endemic regime.
  double input_upper(double margin = 0.95) const { return margin / ratio(); }
};

// SIS epidemic plant in the transformed coordinates (x, 1/u): scalar state
// (infected fraction), scalar input u~ on [1, beta/(mu+gamma)).
PlantSpec sis_plant(const SisParameters& p);

// Raw two-compartment SIS field (s, x) with contact-reduction input u.
Eigen::Vector2d sis_full_field(double s, double x, double u, const SisParameters& p);

// Driftless unicycle (a, b, theta) with inputs (v, omega).
Eigen::Vector3d unicycle_field(const Eigen::Vector3d& state, double v, double omega);

// Range/bearing of the reference u seen from the robot; bearing wrapped to
// (-pi, pi]. Throws when the reference coincides with the position.
struct PolarState {
  double range = 0.0;    // xi
  double heading = 0.0;  // phi
};
PolarState polar_transform(const Eigen::Vector3d& state, const Eigen::Vector2d& reference);

// Unicycle under the onboard polar-coordinates stabilizer with gain k; the
// plant input is the 2-D position reference.
PlantSpec stabilized_unicycle(double k);

// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

// --- Disturbance signals -----------------------------------------------

struct ConstantSignal {
  Vec value;
};

struct SinusoidSignal {
  Vec mean;
  Vec amplitude;
  double angular_frequency = 1.0;
};

// Steps between values, each jump smoothed by a linear ramp so the signal
// stays absolutely continuous with a finite derivative bound.
struct PiecewiseConstantSignal {
  std::vector<double> breakpoints;  // ascending; values[i] holds before breakpoints[i]
  std::vector<Vec> values;          // size = breakpoints.size() + 1
  double ramp = 0.1;
};

class DisturbanceSignal {
 public:
  static DisturbanceSignal constant(Vec value);
  static DisturbanceSignal sinusoid(Vec mean, Vec amplitude, double angular_frequency);
  static DisturbanceSignal piecewise_constant(std::vector<double> breakpoints,
                                              std::vector<Vec> values, double ramp);

  Vec operator()(double t) const;
  Eigen::Index dim() const { return dim_; }
  // Analytic ess sup of ||w_dot|| over the horizon.
  double derivative_ess_sup() const { return ess_sup_; }
  bool is_constant() const { return std::holds_alternative<ConstantSignal>(kind_); }

 private:
  std::variant<ConstantSignal, SinusoidSignal, PiecewiseConstantSignal> kind_;
  Eigen::Index dim_ = 0;
  double ess_sup_ = 0.0;
};

}  // namespace gradflow
