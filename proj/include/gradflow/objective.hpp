#pragma once

#include <functional>
#include <optional>

#include "gradflow/numerics.hpp"
#include "gradflow/plants.hpp"

namespace gradflow {

// Input/state costs with their smoothness data and the input constraint set.
struct CostSpec {
  std::function<double(const Vec& u)> phi;
  std::function<Vec(const Vec& u)> grad_phi;
  std::function<double(const Vec& x)> psi;
  std::function<Vec(const Vec& x)> grad_psi;

  double ell_u = 0.0;  // smoothness of phi
  double ell_x = 0.0;  // smoothness of psi
  double mu_u = 0.0;   // strong convexity of the composite cost
  ConvexRegion region = ConvexRegion::all(0);  // C

  // Smoothness of the composite cost: ell_u + l_hu^2 * ell_x.
  double composite_smoothness(const PlantSpec& plant) const {
    return ell_u + plant.lipschitz.l_hu * plant.lipschitz.l_hu * ell_x;
  }
};

// Quadratic tracking cost w_phi ||u - u_ref||^2 + w_psi ||S x - x_ref||^2,
// where S selects the plant's tracked coordinates.
CostSpec quadratic_tracking_cost(double w_phi, const Vec& u_ref, double w_psi,
                                 const Vec& x_ref, const PlantSpec& plant,
                                 ConvexRegion region);

// phi(u) + psi(h_u(u) + h_w(w)).
double composite_cost(const CostSpec& cost, const PlantSpec& plant, const Vec& u,
                      const Vec& w);

// F(x, u) = grad_phi(u) + H(u)^T grad_psi(x); equals the composite gradient
// when x sits on the steady-state map.
Vec nominal_gradient(const CostSpec& cost, const PlantSpec& plant, const Vec& x,
                     const Vec& u);

struct OptimizerSolution {
  Vec u_star;
  Vec x_star;
  double residual = 0.0;  // projected-gradient fixed-point residual
  int iterations = 0;
};

// Offline oracle for the time-varying optimizer; warm-started projected
// gradient descent with step 1/ell.
class OptimalTrajectoryMap {
 public:
  OptimalTrajectoryMap(const CostSpec& cost, const PlantSpec& plant,
                       double tolerance = 1e-10, int max_iterations = 200000);

  OptimizerSolution solve(const Vec& w);

  // Empirical bound on ||u*(w) - u*(w')|| / ||w - w'|| over a disturbance
  // grid; the analytic constant of the optimal-trajectory map is unknown.
  double estimate_lj(const std::vector<Vec>& disturbance_grid);

  double lj_estimate() const { return lj_estimate_; }
  void clear_warm_start() { warm_start_.reset(); }

 private:
  const CostSpec& cost_;
  const PlantSpec& plant_;
  double tolerance_;
  int max_iterations_;
  std::optional<Vec> warm_start_;
  double lj_estimate_ = 0.0;
};

}  // namespace gradflow
