#pragma once

#include <functional>
#include <memory>

#include "gradflow/numerics.hpp"

namespace gradflow {

// Centered-difference gradient estimator over a scalar cost surrogate.
// Probe points are expected to stay inside the surrogate's training region
// C + ball[epsilon]; points outside are projected back onto C and counted.
class SurrogateGradient {
 public:
  SurrogateGradient(std::function<double(const Vec&)> surrogate, double epsilon,
                    Eigen::Index dimension,
                    ConvexRegion training_core = ConvexRegion::all(0));

  Vec operator()(const Vec& point) const;

  double epsilon() const { return epsilon_; }
  void set_epsilon(double epsilon);
  // Probe evaluations that had to be projected back into the region.
  long out_of_region_count() const { return out_of_region_; }

 private:
  std::function<double(const Vec&)> surrogate_;
  double epsilon_;
  Eigen::Index dimension_;
  ConvexRegion training_core_;
  mutable long out_of_region_ = 0;
};

Vec centered_difference(const SurrogateGradient& surrogate, const Vec& point);

// Per Taylor remainder: sqrt(dim) * M3 * eps^2 / 6 for a third-derivative
// bound M3.
double fd_truncation_bound(double third_derivative_bound, double epsilon,
                           Eigen::Index dimension);

struct EpsilonSelection {
  double epsilon = 0.0;
  double budget = 0.0;  // dim * sup_err / eps + sqrt(dim) * M3 * eps^2 / 6
};

// Closed-form minimizer of the truncation + surrogate-amplification budget,
// clipped to [eps_min, eps_max]. With a zero surrogate error only truncation
// remains, so the smallest admissible step wins; without curvature
// information the configured default is returned.
EpsilonSelection select_epsilon(double sup_surrogate_error, double third_derivative_bound,
                                Eigen::Index dimension, double eps_min = 1e-6,
                                double eps_max = 1.0, double eps_default = 1e-2);

}  // namespace gradflow
