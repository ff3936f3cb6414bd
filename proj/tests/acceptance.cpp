// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Recipes come from GRADFLOW_CONFIG_DIR; criterion 10 drives the
// command-line binary named by GRADFLOW_CLI.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "gradflow/experiment.hpp"
#include "gradflow/rng.hpp"
#include "gradflow/surrogate_gradient.hpp"

using namespace gradflow;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  int number;
  std::string name;
  double budget_seconds;
  std::function<std::string()> run;  // empty string = pass, otherwise detail
};

fs::path config_dir() {
  if (const char* env = std::getenv("GRADFLOW_CONFIG_DIR")) return fs::path(env);
#ifdef GRADFLOW_SOURCE_CONFIG_DIR
  return fs::path(GRADFLOW_SOURCE_CONFIG_DIR);
#else
  throw std::runtime_error("GRADFLOW_CONFIG_DIR is not set");
#endif
}

std::string cli_path() {
  if (const char* env = std::getenv("GRADFLOW_CLI")) return env;
#ifdef GRADFLOW_CLI_PATH
  return GRADFLOW_CLI_PATH;
#else
  throw std::runtime_error("GRADFLOW_CLI is not set");
#endif
}

ExperimentConfig recipe(const std::string& name) {
  return ExperimentConfig::from_file((config_dir() / (name + ".json")).string());
}

const fs::path kOut = "acceptance_out";

std::string check(bool ok, const std::string& detail) { return ok ? "" : detail; }

double linear_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// --- criterion 1 ------------------------------------------------------------

std::string criterion_envelope_grid() {
  const ExperimentConfig base = recipe("lti-theorem1-validation");
  int runs = 0;
  for (const double frac : {0.1, 0.5, 0.9}) {
    for (const double delta : {0.0, 0.01, 0.1}) {
      for (const int wk : {0, 1}) {
        json j = base.raw;
        j["controller"]["eta_fraction"] = frac;
        j["controller"]["delta"] = delta;
        if (wk == 0) j["disturbance"] = {{"kind", "constant"}, {"value", {0.3, -0.2}}};
        const ExperimentConfig cfg = ExperimentConfig::from_json(j);
        const BuiltInstance built = build_instance(cfg);
        const ControllerConfig ctrl = build_controller(cfg, built, kOut);
        Trajectory traj = simulate_closed_loop(built.plant, built.cost, ctrl,
                                               built.disturbance, built.stepper, cfg.seed,
                                               built.x0, built.u0);
        traj.config_hash = cfg.instance_hash();
        const CertificateInputs inputs = certificate_inputs(cfg, built);
        const double eta = resolve_eta(cfg, built);
        const double esssup = built.disturbance.derivative_ess_sup();
        const IssCertificate cert =
            make_certificate(inputs, eta, 0.0, delta, esssup,
                             built.cost.region.diameter(), cfg.instance_hash());
        const BoundReport report = verify_bound(traj, cert, delta, esssup);
        ++runs;
        if (!report.holds) {
          std::ostringstream os;
          os << "envelope violated at eta_fraction=" << frac << ", delta=" << delta
             << ", w=" << (wk ? "sinusoid" : "constant") << " (max violation "
             << report.max_violation << ")";
          return os.str();
        }
      }
    }
  }
  return check(runs == 18, "expected 18 grid runs");
}

// --- criterion 2 ------------------------------------------------------------

std::string criterion_sis_exact() {
  const ExperimentConfig cfg = recipe("sis-exact");
  const SimulateOutputs out = reproduce(cfg, kOut, false);
  if (out.steady_state_err > 1e-3) {
    return "steady-state error " + std::to_string(out.steady_state_err) + " > 1e-3";
  }
  const json& plant = cfg.raw.at("plant");
  const double c =
      (plant.at("mu").get<double>() + plant.at("gamma").get<double>()) /
      plant.at("beta").get<double>();
  const double u_ref = 1.0 / cfg.raw.at("cost").at("u_ref")[0].get<double>();
  const double x_ref = cfg.raw.at("cost").at("x_ref")[0].get<double>();
  const double u_star = (u_ref + c * (1.0 - x_ref)) / (1.0 + c * c);
  const double u_final = out.trajectory.inputs.back()(0);
  if (std::abs(u_final - u_star) > 1e-3) {
    return "limit input " + std::to_string(u_final) + " misses the closed form " +
           std::to_string(u_star);
  }
  // The summary document must satisfy the shipped schema.
  std::ifstream schema_in(config_dir() / "summary.schema.json");
  json schema;
  schema_in >> schema;
  validate_schema(out.summary, schema);
  return "";
}

// --- criterion 3 ------------------------------------------------------------

std::string criterion_state_perception() {
  const ExperimentConfig cfg = recipe("sis-state-perception");
  run_train(cfg, kOut);
  const CertifyOutputs cert = run_certify(cfg, kOut);
  const SimulateOutputs out = run_simulate(cfg, kOut, false);
  const double sse = out.steady_state_err;
  if (!(sse >= 1e-4 && sse <= 1e-1)) {
    return "steady-state error " + std::to_string(sse) + " outside [1e-4, 1e-1]";
  }
  const double budget = cert.certificate.constants.kappa3 * cert.certificate.delta;
  if (!(sse <= budget)) {
    return "steady-state error " + std::to_string(sse) + " exceeds kappa3*delta = " +
           std::to_string(budget);
  }
  return "";
}

// --- criterion 4 ------------------------------------------------------------

std::string criterion_cost_perception() {
  const ExperimentConfig cfg = recipe("sis-cost-perception");
  run_train(cfg, kOut);
  const CertifyOutputs cert = run_certify(cfg, kOut);
  const SimulateOutputs out = run_simulate(cfg, kOut, false);
  const double sse = out.steady_state_err;
  if (!(sse > 1e-8)) return "steady-state error is not distinguishable from zero";
  const double budget = cert.certificate.constants.kappa3 * cert.certificate.delta;
  if (!(sse <= budget)) {
    return "steady-state error " + std::to_string(sse) + " exceeds kappa3*delta = " +
           std::to_string(budget);
  }
  const SweepOutputs sweep = run_sweep(cfg, kOut);
  std::size_t argmin = 0;
  for (std::size_t i = 0; i < sweep.cells.size(); ++i) {
    if (sweep.cells[i].status != "ok") return "sweep cell failed: " + sweep.cells[i].status;
    if (sweep.cells[i].steady_state_err < sweep.cells[argmin].steady_state_err) argmin = i;
  }
  if (argmin == 0 || argmin + 1 == sweep.cells.size()) {
    return "epsilon sweep minimum sits at the boundary (index " + std::to_string(argmin) +
           ")";
  }
  return "";
}

// --- criterion 5 ------------------------------------------------------------

std::string criterion_centered_difference() {
  std::vector<double> log_eps, log_err;
  for (const double eps : {1e-1, 1e-2, 1e-3}) {
    const SurrogateGradient grad([](const Vec& u) { return std::exp(u(0)); }, eps, 1);
    const double err = std::abs(grad(Vec::Ones(1))(0) - std::exp(1.0));
    log_eps.push_back(std::log10(eps));
    log_err.push_back(std::log10(err));
  }
  const double slope = linear_slope(log_eps, log_err);
  if (std::abs(slope - 2.0) > 0.1) {
    return "convergence slope " + std::to_string(slope) + " outside 2 +/- 0.1";
  }

  Rng rng(77);
  for (int i = 0; i < 20; ++i) {
    const Vec a = rng.gaussian_vector(3);
    const Mat Q = a * a.transpose() + Mat::Identity(3, 3);
    const Vec b = rng.gaussian_vector(3);
    const SurrogateGradient grad(
        [Q, b](const Vec& u) { return 0.5 * u.dot(Q * u) + b.dot(u); },
        rng.uniform(0.01, 0.5), 3);
    const Vec point = rng.gaussian_vector(3);
    if ((grad(point) - (Q * point + b)).norm() > 1e-10) {
      return "centered difference is not exact on a random quadratic";
    }
  }
  return "";
}

// --- criterion 6 ------------------------------------------------------------

std::string criterion_unicycle_stabilizer() {
  const double k = 1.0;
  const PlantSpec plant = stabilized_unicycle(k);
  Vec reference(2);
  reference << 1.0, 1.0;
  Vec state(3);
  state << -1.5, -1.5, -M_PI / 2;

  const double dt = 1e-3;
  const double sample_dt = 0.05;
  const long per_sample = std::lround(sample_dt / dt);
  std::vector<double> times, log_range;
  PolarState polar = polar_transform(state.head<3>(), reference.head<2>());
  double v_prev = 0.5 * polar.heading * polar.heading;

  for (long step = 1; step <= 8000; ++step) {
    const auto f = [&](const Vec& x) { return plant.field(x, reference, Vec::Zero(1)); };
    const Vec k1 = f(state);
    const Vec k2 = f(state + 0.5 * dt * k1);
    const Vec k3 = f(state + 0.5 * dt * k2);
    const Vec k4 = f(state + dt * k3);
    state += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (step % per_sample) continue;

    polar = polar_transform(state.head<3>(), reference.head<2>());
    const double v = 0.5 * polar.heading * polar.heading;
    if (v > v_prev * std::exp(-2.0 * k * sample_dt) * (1.0 + 1e-6)) {
      std::ostringstream os;
      os << "V(phi) contraction violated at t = " << step * dt << " (" << v << " > "
         << v_prev * std::exp(-2.0 * k * sample_dt) << ")";
      return os.str();
    }
    v_prev = v;
    times.push_back(step * dt);
    log_range.push_back(std::log(polar.range));
  }
  const double rate = -linear_slope(times, log_range);
  return check(rate > 0.0, "range decay rate is not positive");
}

// --- criterion 7 ------------------------------------------------------------

std::string criterion_unicycle_perception() {
  const ExperimentConfig exact_cfg = recipe("unicycle-exact");
  const SimulateOutputs exact = reproduce(exact_cfg, kOut, false);
  const Vec exact_pos = exact.trajectory.states.back().head(2);
  const double exact_dist = std::hypot(exact_pos(0) + 0.5, exact_pos(1) + 0.5);
  if (exact_dist > 1e-3) {
    return "exact controller finishes " + std::to_string(exact_dist) + " from r*";
  }

  const ExperimentConfig cfg = recipe("unicycle-perception");
  const SimulateOutputs out = reproduce(cfg, kOut, false);
  const json& gen = cfg.raw.at("training").at("generative");
  const double arena_lo = gen.at("arena")[0].get<double>();
  const double arena_hi = gen.at("arena")[1].get<double>();
  const int cells = gen.at("grid").get<int>() - 1;
  const double cell = (arena_hi - arena_lo) / cells;
  const Vec pos = out.trajectory.states.back().head(2);
  const double dist = std::hypot(pos(0) + 0.5, pos(1) + 0.5);
  if (dist > 2.0 * cell) {
    return "perception controller finishes " + std::to_string(dist / cell) +
           " cells from r*";
  }
  return "";
}

// --- criterion 8 ------------------------------------------------------------

bool reference_covered(const std::vector<Vec>& samples, const Vec& x, double rho,
                       CoverMode mode) {
  if (mode == CoverMode::kPlain) {
    for (const Vec& z : samples) {
      if ((x - z).cwiseAbs().maxCoeff() <= rho) return true;
    }
    return false;
  }
  for (std::size_t a = 0; a < samples.size(); ++a) {
    if (!(samples[a].array() <= x.array()).all()) continue;
    for (std::size_t b = 0; b < samples.size(); ++b) {
      if (!(samples[b].array() >= x.array()).all()) continue;
      if ((samples[a] - samples[b]).cwiseAbs().maxCoeff() <= rho) return true;
    }
  }
  return false;
}

std::string criterion_cover_equivalence() {
  Rng rng(515);
  for (int instance = 0; instance < 100; ++instance) {
    const Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng.below(3));
    const std::size_t n_samples = rng.below(51);
    const std::size_t n_probes = 1 + rng.below(200);
    const double rho = rng.uniform(0.05, 1.0);
    std::vector<Vec> samples, probes;
    for (std::size_t i = 0; i < n_samples; ++i)
      samples.push_back(rng.uniform_vector(dim, 0.0, 1.0));
    for (std::size_t i = 0; i < n_probes; ++i)
      probes.push_back(rng.uniform_vector(dim, 0.0, 1.0));
    for (const CoverMode mode : {CoverMode::kPlain, CoverMode::kPartialOrder}) {
      const CoverReport report = check_rho_cover(samples, probes, rho, mode);
      std::size_t expected = 0;
      for (const Vec& x : probes) {
        if (!reference_covered(samples, x, rho, mode)) ++expected;
      }
      if (report.witness_failures.size() != expected || report.ok != (expected == 0)) {
        return "cover checker disagrees with the reference on instance " +
               std::to_string(instance);
      }
    }
  }
  return "";
}

// --- criterion 9 ------------------------------------------------------------

std::string criterion_gradient_lyapunov_checks() {
  Mat A(2, 2);
  A << -1.0, 0.3, 0.2, -2.0;
  const Mat B = Mat::Identity(2, 2);
  Mat E(2, 1);
  E << 0.4, -0.1;
  const PlantSpec plant = lti_plant(A, B, E);
  Vec u_ref(2), x_ref(2);
  u_ref << 0.5, -0.5;
  x_ref << 0.2, 0.1;
  const CostSpec cost =
      quadratic_tracking_cost(1.0, u_ref, 2.0, x_ref, plant, ConvexRegion::all(2));

  Rng rng(99);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Vec u = rng.gaussian_vector(2);
    const Vec w = rng.gaussian_vector(1);
    const Vec grad = nominal_gradient(cost, plant, plant.steady_state(u, w), u);
    for (Eigen::Index d = 0; d < 2; ++d) {
      Vec up = u, dn = u;
      up(d) += h;
      dn(d) -= h;
      const double fd =
          (composite_cost(cost, plant, up, w) - composite_cost(cost, plant, dn, w)) /
          (2.0 * h);
      const double scale = std::max(std::abs(fd), 1.0);
      if (std::abs(grad(d) - fd) > 1e-5 * scale) {
        return "composite gradient misses finite differences";
      }
    }
  }

  const Mat P = solve_lyapunov(A, -Mat::Identity(2, 2));
  const Mat Ainv = A.fullPivLu().inverse();
  for (int i = 0; i < 100; ++i) {
    const Vec x = rng.gaussian_vector(2);
    const Vec u = rng.gaussian_vector(2);
    const Vec w = rng.gaussian_vector(1);
    const Vec hh = -Ainv * B * u - Ainv * E * w;
    const double w_dot = 2.0 * (x - hh).dot(P * (A * x + B * u + E * w));
    if (std::abs(w_dot + (x - hh).squaredNorm()) > 1e-8) {
      return "Lyapunov derivative is not -||x - h||^2";
    }
  }
  return "";
}

// --- criterion 10 -----------------------------------------------------------

std::string criterion_certification_gate() {
  // Hand-worked ceiling: mu=1, ell=2, s=1/2, d3=d4=d5=l_hu=1, ell_y=2.
  CertificateInputs in;
  in.mu = 1.0;
  in.ell = 2.0;
  in.ell_y = 2.0;
  in.l_hu = 1.0;
  in.l_hw = 1.0;
  in.s = 0.5;
  in.lyapunov = {0.5, 0.5, 1.0, 1.0, 1.0, 1.0, "user-supplied"};
  const double ceiling = eta_star(in);
  if (std::abs(ceiling - 0.0138889) > 1e-7) {
    return "eta* hand check gives " + std::to_string(ceiling);
  }

  const std::string cli = cli_path();
  const ExperimentConfig base = recipe("lti-theorem1-validation");
  const BuiltInstance built = build_instance(base);
  const double star = eta_star(certificate_inputs(base, built));
  json j = base.raw;
  j["controller"] = {{"mode", "exact"}, {"eta", 2.0 * star}};
  fs::create_directories(kOut);
  const fs::path bad = kOut / "over-ceiling.json";
  std::ofstream(bad) << j.dump(2);

  const std::string command = cli + " certify --config " + bad.string() +
                              " --out " + (kOut / "gate").string() + " 2>/dev/null";
  const int status = std::system(command.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return check(code == 4,
               "certify exited with code " + std::to_string(code) + " instead of 4");
}

}  // namespace

int main() {
  fs::remove_all(kOut);
  fs::create_directories(kOut);

  const std::vector<Criterion> criteria = {
      {1, "certified tracking envelope holds across the eta/delta/disturbance grid", 60.0,
       criterion_envelope_grid},
      {2, "sis-exact converges to the closed-form optimizer", 10.0, criterion_sis_exact},
      {3, "sis-state-perception plateau sits in range and under kappa3*delta", 120.0,
       criterion_state_perception},
      {4, "sis-cost-perception error under kappa3*delta with interior epsilon minimum",
       120.0, criterion_cost_perception},
      {5, "centered differences: slope 2 on exp, exact on quadratics", 1.0,
       criterion_centered_difference},
      {6, "unicycle stabilizer contracts V(phi) and the range decays", 5.0,
       criterion_unicycle_stabilizer},
      {7, "unicycle perception lands within 2 grid cells of r*", 180.0,
       criterion_unicycle_perception},
      {8, "cover checker matches an exhaustive reference on 100 instances", 10.0,
       criterion_cover_equivalence},
      {9, "composite gradient and Lyapunov derivative numeric checks", 5.0,
       criterion_gradient_lyapunov_checks},
      {10, "certification gate refuses eta >= eta* with exit code 4", 1.0,
       criterion_certification_gate},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    try {
      detail = criterion.run();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (detail.empty() && elapsed > criterion.budget_seconds) {
      std::ostringstream os;
      os << "exceeded the " << criterion.budget_seconds << " s budget (" << elapsed
         << " s)";
      detail = os.str();
    }
    if (detail.empty()) {
      std::printf("[PASS] criterion %2d (%5.1fs): %s\n", criterion.number, elapsed,
                  criterion.name.c_str());
    } else {
      std::printf("[FAIL] criterion %2d (%5.1fs): %s - %s\n", criterion.number, elapsed,
                  criterion.name.c_str(), detail.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures > 0) {
    std::printf("%d of %zu acceptance criteria failed\n", failures, criteria.size());
    return 1;
  }
  std::printf("all %zu acceptance criteria passed\n", criteria.size());
  return 0;
}
