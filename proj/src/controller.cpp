#include "gradflow/controller.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "gradflow/errors.hpp"
#include "gradflow/rng.hpp"

namespace gradflow {

void ControllerConfig::validate() const {
  if (!(eta > 0.0)) throw ConfigError("controller: eta must be > 0");
  if (const auto* inj = std::get_if<InjectedErrorMode>(&mode)) {
    if (inj->gamma < 0.0 || inj->delta < 0.0) {
      throw ConfigError("injected error: gamma and delta must be nonnegative");
    }
  }
}

const char* ControllerConfig::mode_name() const {
  if (std::holds_alternative<ExactMode>(mode)) return "exact";
  if (std::holds_alternative<InjectedErrorMode>(mode)) return "injected_error";
  if (std::holds_alternative<StatePerceptionMode>(mode)) return "state_perception";
  return "cost_perception";
}

void Trajectory::validate() const {
  const std::size_t n = times.size();
  if (states.size() != n || inputs.size() != n || opt_inputs.size() != n ||
      opt_states.size() != n || tracking_error.size() != n) {
    throw NumericError("trajectory: column lengths differ");
  }
  if (!bound.empty() && bound.size() != n) {
    throw NumericError("trajectory: bound column length differs");
  }
  for (const double e : tracking_error) {
    if (e < 0.0) throw NumericError("trajectory: negative tracking error");
  }
}

Vec controller_field(const ControllerConfig& config, const CostSpec& cost,
                     const PlantSpec& plant, const Vec& x_feedback, const Vec& u,
                     const Vec* injected_error) {
  Vec estimate;
  if (const auto* cp = std::get_if<CostPerceptionMode>(&config.mode)) {
    estimate = cp->grad_input_estimate(u) +
               plant.input_jacobian(u).transpose() * cp->grad_state_estimate(x_feedback);
  } else {
    estimate = nominal_gradient(cost, plant, x_feedback, u);
    if (std::holds_alternative<InjectedErrorMode>(config.mode) && injected_error) {
      estimate += *injected_error;
    }
  }
  if (!estimate.allFinite()) {
    throw NumericError("controller: non-finite gradient estimate");
  }
  return project(config.region, u - config.eta * estimate) - u;
}

Trajectory simulate_closed_loop(const PlantSpec& plant, const CostSpec& cost,
                                const ControllerConfig& config,
                                const DisturbanceSignal& disturbance,
                                const StepperConfig& stepper, std::uint64_t seed,
                                const Vec& x0, const Vec& u0) {
  config.validate();
  stepper.validate();
  if (x0.size() != plant.n) throw ConfigError("simulate: x0 dimension mismatch");
  if (u0.size() != plant.n_u) throw ConfigError("simulate: u0 dimension mismatch");

  Vec u_start = u0;
  if (config.project_initial_input) u_start = project(config.region, u_start);

  // The injected error direction is frozen per run so that identical seeds
  // reproduce identical trajectories bit for bit.
  Rng rng(seed);
  const Vec error_direction = rng.unit_vector(plant.n_u);
  const auto* injected = std::get_if<InjectedErrorMode>(&config.mode);
  const auto* perception = std::get_if<StatePerceptionMode>(&config.mode);
  double last_z_norm = 0.0;  // vanishing part of the injected error

  const auto joint_field = [&](double t, const Vec& y) -> Vec {
    const Vec x = y.head(plant.n);
    const Vec u = y.tail(plant.n_u);
    const Vec w = disturbance(t);

    Vec x_feedback = x;
    if (perception) x_feedback = perception->estimate(perception->observe(x));

    Vec e;
    const Vec* e_ptr = nullptr;
    if (injected) {
      e = (injected->gamma * last_z_norm + injected->delta) * error_direction;
      e_ptr = &e;
    }

    Vec dy(plant.n + plant.n_u);
    dy.head(plant.n) = plant.field(x, u, w);
    dy.tail(plant.n_u) = controller_field(config, cost, plant, x_feedback, u, e_ptr);
    return dy;
  };

  OptimalTrajectoryMap oracle(cost, plant);
  Trajectory traj;
  traj.seed = seed;

  const auto observer = [&](long, double t, const Vec& y) {
    const Vec x = y.head(plant.n);
    const Vec u = y.tail(plant.n_u);
    const OptimizerSolution sol = oracle.solve(disturbance(t));
    const Vec dx = plant.select_tracked(x) - plant.select_tracked(sol.x_star);
    const Vec du = u - sol.u_star;
    const double err = std::sqrt(dx.squaredNorm() + du.squaredNorm());
    last_z_norm = err;
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.inputs.push_back(u);
    traj.opt_inputs.push_back(sol.u_star);
    traj.opt_states.push_back(sol.x_star);
    traj.tracking_error.push_back(err);
  };

  Vec y0(plant.n + plant.n_u);
  y0 << x0, u_start;
  const SamplePath path = integrate(joint_field, y0, stepper, observer);
  if (path.truncated) {
    throw NumericError("simulate_closed_loop: " + path.failure);
  }
  traj.validate();
  return traj;
}

double steady_state_error(const Trajectory& trajectory, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
    throw ConfigError("steady_state_error: tail fraction must lie in (0, 1]");
  }
  const std::size_t n = trajectory.tracking_error.size();
  const std::size_t tail = static_cast<std::size_t>(
      std::ceil(tail_fraction * static_cast<double>(n)));
  if (tail < 10) {
    throw ConfigError("steady_state_error: tail window holds fewer than 10 samples");
  }
  double worst = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) {
    worst = std::max(worst, trajectory.tracking_error[i]);
  }
  return worst;
}

double fitted_decay_rate(const Trajectory& trajectory) {
  const std::size_t n = trajectory.size();
  if (n < 3) return 0.0;
  // Fit over the segment where the error still sits clearly above its floor.
  double floor = trajectory.tracking_error.back();
  for (const double e : trajectory.tracking_error) floor = std::min(floor, e);
  const double cutoff = std::max(10.0 * floor, 1e-14);

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = trajectory.tracking_error[i];
    if (e <= cutoff) continue;
    const double x = trajectory.times[i];
    const double y = std::log(e);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 3) return 0.0;
  const double denom = static_cast<double>(count) * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) return 0.0;
  const double slope = (static_cast<double>(count) * sxy - sx * sy) / denom;
  return -slope;
}

void save_trajectory_csv(const Trajectory& trajectory, const std::string& path) {
  trajectory.validate();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open trajectory file for writing: " + path);
  out << "# config_hash=" << std::hex << trajectory.config_hash << std::dec
      << " seed=" << trajectory.seed << "\n";

  const Eigen::Index n = trajectory.states.empty() ? 0 : trajectory.states.front().size();
  const Eigen::Index m = trajectory.inputs.empty() ? 0 : trajectory.inputs.front().size();
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",u" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",u_star" << i;
  for (Eigen::Index i = 0; i < n; ++i) out << ",x_star" << i;
  out << ",err,bound\n";

  out.precision(17);
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    out << trajectory.times[k];
    for (Eigen::Index i = 0; i < n; ++i) out << "," << trajectory.states[k](i);
    for (Eigen::Index i = 0; i < m; ++i) out << "," << trajectory.inputs[k](i);
    for (Eigen::Index i = 0; i < m; ++i) out << "," << trajectory.opt_inputs[k](i);
    for (Eigen::Index i = 0; i < n; ++i) out << "," << trajectory.opt_states[k](i);
    out << "," << trajectory.tracking_error[k] << ","
        << (trajectory.bound.empty() ? std::nan("") : trajectory.bound[k]) << "\n";
  }
}

}  // namespace gradflow
