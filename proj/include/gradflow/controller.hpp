#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>

#include "gradflow/numerics.hpp"
#include "gradflow/objective.hpp"
#include "gradflow/plants.hpp"

namespace gradflow {

// Controller feeds on the exact nominal gradient F(x, u).
struct ExactMode {};

// F(x, u) plus a synthetic gradient error of norm gamma * ||z|| + delta along
// a seeded fixed unit direction (the vanishing part uses the tracking error
// at the most recent recorded sample; it is exact for gamma = 0).
struct InjectedErrorMode {
  double gamma = 0.0;
  double delta = 0.0;
};

// F(p_hat(q(x)), u): the state entering the gradient comes from a perception
// pipeline instead of the plant.
struct StatePerceptionMode {
  std::function<Vec(const Vec& x)> observe;   // generative map q
  std::function<Vec(const Vec& xi)> estimate; // trained perception map p_hat
};

// g_u_hat(u) + H(u)^T g_x_hat(x): both cost gradients come from estimators
// (centered differences over surrogates, or the analytic gradient when a
// cost is known).
struct CostPerceptionMode {
  std::function<Vec(const Vec& u)> grad_input_estimate;
  std::function<Vec(const Vec& x)> grad_state_estimate;
};

using ControllerMode =
    std::variant<ExactMode, InjectedErrorMode, StatePerceptionMode, CostPerceptionMode>;

struct ControllerConfig {
  double eta = 0.1;
  ControllerMode mode = ExactMode{};
  ConvexRegion region = ConvexRegion::all(0);  // C
  bool project_initial_input = true;

  void validate() const;
  const char* mode_name() const;
};

// Closed-loop record at the recorded samples, with the tracking-error oracle.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> inputs;
  std::vector<Vec> opt_inputs;      // u*_t
  std::vector<Vec> opt_states;      // x*_t
  std::vector<double> tracking_error;  // ||z|| over the tracked coordinates
  std::vector<double> bound;        // optional envelope, empty until attached
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  std::size_t size() const { return times.size(); }
  void validate() const;
};

// One projected gradient-flow evaluation: Pi_C{u - eta * estimate} - u.
// x_feedback is the state the mode wants (true state, or the perceived one);
// injected_error is consumed only by InjectedErrorMode.
Vec controller_field(const ControllerConfig& config, const CostSpec& cost,
                     const PlantSpec& plant, const Vec& x_feedback, const Vec& u,
                     const Vec* injected_error = nullptr);

// Integrates the joint (x, u) flow; queries the optimizer oracle at every
// recorded sample and stores the tracking error.
Trajectory simulate_closed_loop(const PlantSpec& plant, const CostSpec& cost,
                                const ControllerConfig& config,
                                const DisturbanceSignal& disturbance,
                                const StepperConfig& stepper, std::uint64_t seed,
                                const Vec& x0, const Vec& u0);

// Max of ||z|| over the trailing tail_fraction of the horizon (at least 10
// samples).
double steady_state_error(const Trajectory& trajectory, double tail_fraction = 0.2);

// Least-squares slope of -log ||z|| over the initial decay segment; 0 when
// there is no decay to fit.
double fitted_decay_rate(const Trajectory& trajectory);

void save_trajectory_csv(const Trajectory& trajectory, const std::string& path);

}  // namespace gradflow
