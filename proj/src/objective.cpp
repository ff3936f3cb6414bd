#include "gradflow/objective.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "gradflow/errors.hpp"

namespace gradflow {

CostSpec quadratic_tracking_cost(double w_phi, const Vec& u_ref, double w_psi,
                                 const Vec& x_ref, const PlantSpec& plant,
                                 ConvexRegion region) {
  if (u_ref.size() != plant.n_u) {
    throw ConfigError("quadratic cost: u_ref dimension does not match the plant input");
  }
  const std::vector<Eigen::Index> tracked = plant.tracked();
  if (x_ref.size() != static_cast<Eigen::Index>(tracked.size())) {
    throw ConfigError("quadratic cost: x_ref dimension does not match the tracked state block");
  }

  CostSpec cost;
  cost.phi = [w_phi, u_ref](const Vec& u) -> double {
    return w_phi * (u - u_ref).squaredNorm();
  };
  cost.grad_phi = [w_phi, u_ref](const Vec& u) -> Vec {
    return 2.0 * w_phi * (u - u_ref);
  };
  cost.psi = [w_psi, x_ref, tracked](const Vec& x) -> double {
    double acc = 0.0;
    for (std::size_t i = 0; i < tracked.size(); ++i) {
      const double d = x(tracked[i]) - x_ref(static_cast<Eigen::Index>(i));
      acc += d * d;
    }
    return w_psi * acc;
  };
  cost.grad_psi = [w_psi, x_ref, tracked, n = plant.n](const Vec& x) -> Vec {
    Vec g = Vec::Zero(n);
    for (std::size_t i = 0; i < tracked.size(); ++i) {
      g(tracked[i]) = 2.0 * w_psi * (x(tracked[i]) - x_ref(static_cast<Eigen::Index>(i)));
    }
    return g;
  };
  cost.ell_u = 2.0 * w_phi;
  cost.ell_x = 2.0 * w_psi;
  // The composition with the affine steady-state map only adds convex
  // curvature, so 2 w_phi is a valid strong-convexity constant.
  cost.mu_u = 2.0 * w_phi;
  cost.region = std::move(region);
  return cost;
}

double composite_cost(const CostSpec& cost, const PlantSpec& plant, const Vec& u,
                      const Vec& w) {
  return cost.phi(u) + cost.psi(plant.steady_state(u, w));
}

Vec nominal_gradient(const CostSpec& cost, const PlantSpec& plant, const Vec& x,
                     const Vec& u) {
  return cost.grad_phi(u) + plant.input_jacobian(u).transpose() * cost.grad_psi(x);
}

OptimalTrajectoryMap::OptimalTrajectoryMap(const CostSpec& cost, const PlantSpec& plant,
                                           double tolerance, int max_iterations)
    : cost_(cost), plant_(plant), tolerance_(tolerance), max_iterations_(max_iterations) {
  if (!(cost.mu_u > 0.0)) {
    throw ConfigError("solve_optimizer requires a strongly convex composite cost (mu_u > 0)");
  }
}

OptimizerSolution OptimalTrajectoryMap::solve(const Vec& w) {
  const double ell = cost_.composite_smoothness(plant_);
  if (!(ell > 0.0)) throw ConfigError("solve_optimizer: composite smoothness must be > 0");
  const double step = 1.0 / ell;

  Vec u = warm_start_ ? *warm_start_ : Vec::Zero(plant_.n_u);
  u = project(cost_.region, u);

  const auto gradient = [&](const Vec& point) -> Vec {
    return nominal_gradient(cost_, plant_, plant_.steady_state(point, w), point);
  };

  OptimizerSolution sol;
  double residual = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < max_iterations_; ++iter) {
    const Vec next = project(cost_.region, u - step * gradient(u));
    residual = (next - u).norm();
    u = next;
    if (residual <= tolerance_) break;
  }
  if (residual > tolerance_) {
    std::ostringstream os;
    os << "solve_optimizer: exhausted " << max_iterations_
       << " iterations, final fixed-point residual " << residual;
    throw NumericError(os.str());
  }

  warm_start_ = u;
  sol.u_star = u;
  sol.x_star = plant_.steady_state(u, w);
  sol.residual = (u - project(cost_.region, u - step * gradient(u))).norm();
  sol.iterations = iter + 1;
  return sol;
}

double OptimalTrajectoryMap::estimate_lj(const std::vector<Vec>& disturbance_grid) {
  double worst = 0.0;
  std::optional<Vec> prev_w;
  std::optional<Vec> prev_u;
  for (const Vec& w : disturbance_grid) {
    const OptimizerSolution sol = solve(w);
    if (prev_w) {
      const double dw = (w - *prev_w).norm();
      if (dw > 1e-12) {
        worst = std::max(worst, (sol.u_star - *prev_u).norm() / dw);
      }
    }
    prev_w = w;
    prev_u = sol.u_star;
  }
  lj_estimate_ = worst;
  return worst;
}

}  // namespace gradflow
