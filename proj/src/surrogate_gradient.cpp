#include "gradflow/surrogate_gradient.hpp"

#include <cmath>

#include "gradflow/errors.hpp"

namespace gradflow {

SurrogateGradient::SurrogateGradient(std::function<double(const Vec&)> surrogate,
                                     double epsilon, Eigen::Index dimension,
                                     ConvexRegion training_core)
    : surrogate_(std::move(surrogate)),
      epsilon_(epsilon),
      dimension_(dimension),
      training_core_(std::move(training_core)) {
  if (!(epsilon > 0.0)) throw ConfigError("centered difference requires epsilon > 0");
  if (dimension < 1) throw ConfigError("centered difference requires a positive dimension");
}

void SurrogateGradient::set_epsilon(double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("centered difference requires epsilon > 0");
  epsilon_ = epsilon;
}

Vec SurrogateGradient::operator()(const Vec& point) const {
  if (point.size() != dimension_) {
    throw ConfigError("centered difference: point dimension mismatch");
  }
  const bool check_region = !training_core_.unconstrained() && training_core_.dim() == dimension_;
  const auto eval = [&](Vec probe) -> double {
    if (check_region) {
      const Vec core = project(training_core_, probe);
      if ((probe - core).norm() > epsilon_ + 1e-12) {
        // Outside C + ball[epsilon]; misconfigured caller. Evaluate at the
        // projection instead and count the event.
        ++out_of_region_;
        probe = core;
      }
    }
    return surrogate_(probe);
  };

  Vec gradient = Vec::Zero(dimension_);
  const double scale = 1.0 / (2.0 * epsilon_);
  for (Eigen::Index i = 0; i < dimension_; ++i) {
    Vec plus = point;
    Vec minus = point;
    plus(i) += epsilon_;
    minus(i) -= epsilon_;
    gradient(i) = scale * (eval(std::move(plus)) - eval(std::move(minus)));
  }
  return gradient;
}

Vec centered_difference(const SurrogateGradient& surrogate, const Vec& point) {
  return surrogate(point);
}

double fd_truncation_bound(double third_derivative_bound, double epsilon,
                           Eigen::Index dimension) {
  if (third_derivative_bound < 0.0) {
    throw ConfigError("fd_truncation_bound: M3 must be nonnegative");
  }
  if (!(epsilon > 0.0)) throw ConfigError("fd_truncation_bound: epsilon must be > 0");
  return std::sqrt(static_cast<double>(dimension)) * third_derivative_bound * epsilon *
         epsilon / 6.0;
}

EpsilonSelection select_epsilon(double sup_surrogate_error, double third_derivative_bound,
                                Eigen::Index dimension, double eps_min, double eps_max,
                                double eps_default) {
  if (sup_surrogate_error < 0.0) {
    throw ConfigError("select_epsilon: surrogate error must be nonnegative");
  }
  const double dim = static_cast<double>(dimension);
  const auto budget = [&](double eps) {
    return dim * sup_surrogate_error / eps + fd_truncation_bound(third_derivative_bound, eps, dimension);
  };

  EpsilonSelection sel;
  if (!(third_derivative_bound > 0.0)) {
    // No curvature information to trade against; fall back to the default.
    sel.epsilon = eps_default;
    sel.budget = budget(sel.epsilon);
    return sel;
  }
  if (sup_surrogate_error == 0.0) {
    sel.epsilon = eps_min;  // pure truncation: smaller is better
    sel.budget = budget(sel.epsilon);
    return sel;
  }
  const double sqrt_dim = std::sqrt(dim);
  const double unclipped =
      std::cbrt(3.0 * sqrt_dim * sup_surrogate_error / third_derivative_bound);
  sel.epsilon = std::clamp(unclipped, eps_min, eps_max);
  sel.budget = budget(sel.epsilon);
  return sel;
}

}  // namespace gradflow
