#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace gradflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Axis-aligned box {x : lower <= x <= upper}.
struct BoxRegion {
  Vec lower;
  Vec upper;
};

// Euclidean ball {x : ||x - center|| <= radius}.
struct BallRegion {
  Vec center;
  double radius = 1.0;
};

// Intersection of halfspaces a_i . x <= b_i (rows of A, entries of b).
struct HalfspaceRegion {
  Mat normals;   // one halfspace per row
  Vec offsets;
};

// Closed convex constraint set; projections are closed-form for boxes and
// balls, Dykstra sweeps for halfspace intersections.
class ConvexRegion {
 public:
  static ConvexRegion box(Vec lower, Vec upper);
  static ConvexRegion ball(Vec center, double radius);
  static ConvexRegion halfspaces(Mat normals, Vec offsets);
  // Unconstrained placeholder: projection is the identity.
  static ConvexRegion all(Eigen::Index dim);

  Eigen::Index dim() const { return dim_; }
  bool unconstrained() const { return std::holds_alternative<std::monostate>(kind_); }
  bool is_box() const { return std::holds_alternative<BoxRegion>(kind_); }
  const BoxRegion& as_box() const { return std::get<BoxRegion>(kind_); }
  const BallRegion& as_ball() const { return std::get<BallRegion>(kind_); }

  bool contains(const Vec& point, double tol = 0.0) const;
  // Smallest axis-aligned box containing the region (used for diam(U)).
  BoxRegion bounding_box() const;
  double diameter() const;

  friend Vec project(const ConvexRegion& region, const Vec& point);

 private:
  std::variant<std::monostate, BoxRegion, BallRegion, HalfspaceRegion> kind_;
  Eigen::Index dim_ = 0;
};

Vec project(const ConvexRegion& region, const Vec& point);

// Fixed-step integration plan over [t0, t1]; (t1 - t0)/dt must be an integer
// step count within 1e-9 rounding slack.
struct StepperConfig {
  double dt = 1e-3;
  double t0 = 0.0;
  double t1 = 1.0;
  long record_every = 1;

  long step_count() const;
  void validate() const;
};

using OdeField = std::function<Vec(double t, const Vec& state)>;

// Classical 4-stage Runge-Kutta update; throws NumericError when the field
// returns a non-finite value, naming the offending time.
Vec rk4_step(const OdeField& field, const Vec& state, double t, double dt);

struct SamplePath {
  std::vector<double> times;
  std::vector<Vec> states;
  bool truncated = false;      // a numeric failure cut the horizon short
  std::string failure;
};

using SampleObserver =
    std::function<void(long sample_index, double t, const Vec& state)>;

// RK4 over the whole horizon. Samples (including t0 and the final step) are
// recorded every `record_every` steps and reported to the observer. Numeric
// failures mid-horizon truncate the path instead of throwing.
SamplePath integrate(const OdeField& field, const Vec& x0,
                     const StepperConfig& stepper,
                     const SampleObserver& observer = nullptr);

}  // namespace gradflow
