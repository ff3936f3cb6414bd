#include "gradflow/experiment.hpp"

#include <doctest.h>
#include <filesystem>
#include <fstream>

#include "gradflow/errors.hpp"

using namespace gradflow;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json lti_config_json() {
  return json::parse(R"({
    "name": "unit-lti",
    "seed": 42,
    "plant": {"kind": "lti", "A": [[-1.0, 0.0], [0.0, -1.0]],
              "B": [[1.0, 0.0], [0.0, 1.0]], "E": [[1.0, 0.0], [0.0, 1.0]]},
    "cost": {"kind": "quadratic_tracking", "w_phi": 1.0, "w_psi": 1.0,
             "u_ref": [1.0, 0.5], "x_ref": [0.5, 1.0], "mu_u": 4.0},
    "region": {"kind": "box", "lower": [-5.0, -5.0], "upper": [5.0, 5.0]},
    "controller": {"mode": "exact", "eta_fraction": 0.5},
    "disturbance": {"kind": "constant", "value": [0.3, -0.2]},
    "stepper": {"dt": 0.01, "t0": 0.0, "t1": 40.0, "record_every": 20},
    "initial_state": "equilibrium",
    "initial_input": [2.0, 2.0],
    "certificate": {"s": 0.5, "r0": 1.0, "lyapunov": {"source": "analytic-lti"}},
    "tail_fraction": 0.2
  })");
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("test_out") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("fnv1a hashing is deterministic with the standard offset basis") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == fnv1a64("a"));
  CHECK(fnv1a64("a") != fnv1a64("b"));
}

TEST_CASE("configs require a seed") {
  json j = lti_config_json();
  j.erase("seed");
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
}

TEST_CASE("instance hash ignores controller changes, full hash does not") {
  const ExperimentConfig a = ExperimentConfig::from_json(lti_config_json());
  json mutated = lti_config_json();
  mutated["controller"]["eta_fraction"] = 0.25;
  const ExperimentConfig b = ExperimentConfig::from_json(mutated);
  CHECK(a.instance_hash() == b.instance_hash());
  CHECK(a.full_hash() != b.full_hash());

  json other_plant = lti_config_json();
  other_plant["plant"]["A"][0][0] = -2.0;
  const ExperimentConfig c = ExperimentConfig::from_json(other_plant);
  CHECK(a.instance_hash() != c.instance_hash());
}

TEST_CASE("build_instance wires the plant, cost and horizon together") {
  const ExperimentConfig config = ExperimentConfig::from_json(lti_config_json());
  const BuiltInstance built = build_instance(config);
  CHECK(built.plant.n == 2);
  CHECK(built.plant.n_u == 2);
  CHECK(built.cost.mu_u == 4.0);
  CHECK(built.stepper.step_count() == 4000);
  CHECK(built.x0.size() == 2);

  // The sis plant defaults its transformed input box.
  json sis = lti_config_json();
  sis["plant"] = {{"kind", "sis"}};
  sis["cost"] = {{"kind", "quadratic_tracking"}, {"u_ref", {0.36}}, {"x_ref", {0.85}}};
  sis.erase("region");
  sis["disturbance"] = {{"kind", "constant"}, {"value", {0.0}}};
  sis["initial_state"] = {0.5};
  sis["initial_input"] = {4.0};
  const BuiltInstance sis_built = build_instance(ExperimentConfig::from_json(sis));
  CHECK(sis_built.plant.n == 1);
  const BoxRegion box = sis_built.cost.region.bounding_box();
  CHECK(box.lower(0) == doctest::Approx(1.0));
  CHECK(box.upper(0) == doctest::Approx(0.95 * 4.0 / (1.0 / 9.0 + 1e-4)));
  // Reciprocal reference convention: u_ref = 0.36 becomes 1/0.36.
  const Vec g = sis_built.cost.grad_phi(Vec::Constant(1, 1.0 / 0.36));
  CHECK(g(0) == doctest::Approx(0.0));
}

TEST_CASE("equilibrium initial state resolves through the steady-state map") {
  json j = lti_config_json();
  j["initial_state"] = "equilibrium";
  const BuiltInstance built = build_instance(ExperimentConfig::from_json(j));
  const Vec w = built.disturbance(0.0);
  CHECK((built.x0 - built.plant.steady_state(built.u0, w)).norm() < 1e-12);
}

TEST_CASE("resolve_eta applies the fraction against the gain ceiling") {
  const ExperimentConfig config = ExperimentConfig::from_json(lti_config_json());
  const BuiltInstance built = build_instance(config);
  const CertificateInputs inputs = certificate_inputs(config, built);
  CHECK(resolve_eta(config, built) == doctest::Approx(0.5 * eta_star(inputs)));

  json no_cert = lti_config_json();
  no_cert.erase("certificate");
  const ExperimentConfig bad = ExperimentConfig::from_json(no_cert);
  CHECK_THROWS_AS(resolve_eta(bad, build_instance(bad)), ConfigError);
}

TEST_CASE("schema validation catches missing and mistyped fields") {
  const json schema = json::parse(R"({
    "type": "object",
    "required": ["name", "values"],
    "properties": {
      "name": {"type": "string"},
      "values": {"type": "array", "items": {"type": "number"}}
    }
  })");
  CHECK_NOTHROW(validate_schema(json{{"name", "x"}, {"values", {1.0, 2.0}}}, schema));
  CHECK_THROWS_AS(validate_schema(json{{"name", "x"}}, schema), ConfigError);
  CHECK_THROWS_AS(validate_schema(json{{"name", 3}, {"values", json::array()}}, schema),
                  ConfigError);
  CHECK_THROWS_AS(
      validate_schema(json{{"name", "x"}, {"values", {"not-a-number"}}}, schema),
      ConfigError);
}

TEST_CASE("training rejects empty sample sets") {
  TempDir dir("train-empty");
  json j = lti_config_json();
  j["training"] = {{"target", "psi"},
                   {"x_train", {{"lower", {0.0, 0.0}}, {"upper", {1.0, 1.0}}}},
                   {"samples", 0},
                   {"net", {{"kind", "mlp"}, {"widths", {2, 4, 1}}}}};
  const ExperimentConfig config = ExperimentConfig::from_json(j);
  CHECK_THROWS_AS(run_train(config, dir.path), ConfigError);
}

TEST_CASE("simulate writes bit-identical outputs on reruns") {
  TempDir dir("sim-deterministic");
  const ExperimentConfig config = ExperimentConfig::from_json(lti_config_json());

  const SimulateOutputs first = run_simulate(config, dir.path, false);
  std::ifstream t1(first.trajectory_file);
  const std::string csv1((std::istreambuf_iterator<char>(t1)), {});
  std::ifstream s1(first.summary_file);
  const std::string sum1((std::istreambuf_iterator<char>(s1)), {});

  const SimulateOutputs second = run_simulate(config, dir.path, false);
  std::ifstream t2(second.trajectory_file);
  const std::string csv2((std::istreambuf_iterator<char>(t2)), {});
  std::ifstream s2(second.summary_file);
  const std::string sum2((std::istreambuf_iterator<char>(s2)), {});

  CHECK(csv1 == csv2);
  CHECK(sum1 == sum2);
  CHECK_FALSE(csv1.empty());

  // The certified envelope holds on this exact-mode run.
  REQUIRE(first.bound_report.has_value());
  CHECK(first.bound_report->holds);
  CHECK(first.summary.at("bound").at("holds").get<bool>());
}

TEST_CASE("certify writes a complete certificate document") {
  TempDir dir("certify");
  const ExperimentConfig config = ExperimentConfig::from_json(lti_config_json());
  const CertifyOutputs out = run_certify(config, dir.path);
  CHECK(fs::exists(out.certificate_file));
  CHECK(out.report.at("eta_star").get<double>() > 0.0);
  CHECK(out.report.at("lyapunov").at("provenance") == "analytic-lti");
  CHECK(out.report.at("constants").contains("kappa3"));
  // d1 = d2 = 0.5 for A = -I.
  CHECK(out.report.at("lyapunov").at("d")[0].get<double>() == doctest::Approx(0.5));
  CHECK(out.report.at("lyapunov").at("d")[1].get<double>() == doctest::Approx(0.5));
}

TEST_CASE("certify refuses a gain at the ceiling") {
  TempDir dir("certify-refuse");
  json j = lti_config_json();
  const ExperimentConfig base = ExperimentConfig::from_json(j);
  const BuiltInstance built = build_instance(base);
  const double ceiling = eta_star(certificate_inputs(base, built));
  j["controller"] = {{"mode", "exact"}, {"eta", 2.0 * ceiling}};
  const ExperimentConfig config = ExperimentConfig::from_json(j);
  CHECK_THROWS_AS(run_certify(config, dir.path), CertificationError);
}

TEST_CASE("residual state perception trains the lifted map end to end") {
  TempDir dir("resnet-state");
  json j = json::parse(R"({
    "name": "unit-sis-resnet",
    "seed": 12,
    "plant": {"kind": "sis"},
    "cost": {"kind": "quadratic_tracking", "u_ref": [0.36], "x_ref": [0.85]},
    "controller": {"mode": "state_perception", "eta_fraction": 0.5},
    "disturbance": {"kind": "constant", "value": [0.0]},
    "stepper": {"dt": 0.001, "t0": 0.0, "t1": 30.0, "record_every": 100},
    "initial_state": [0.5],
    "initial_input": [4.0],
    "training": {
      "target": "state",
      "generative": {"kind": "gaussian_basis", "means": [1.0, 5.0, 9.0, 13.0], "variance": 1.0},
      "x_train": {"lower": [0.4], "upper": [1.0]},
      "samples": 200,
      "net": {"kind": "residual", "width": 4, "blocks": 2, "block_hidden": 8},
      "epochs": 150, "batch": 32, "learning_rate": 0.01,
      "cover": {"rho": 0.05, "mode": "partial_order", "probes_per_dim": 15}
    },
    "certificate": {"s": 0.5, "r0": 0.5, "lyapunov": {"source": "analytic-lti"},
                    "operating_input": "optimal"},
    "tail_fraction": 0.2
  })");
  const ExperimentConfig config = ExperimentConfig::from_json(j);
  const auto trained = run_train(config, dir.path);
  REQUIRE(trained.size() == 1);
  CHECK(trained[0].report.at("net_kind") == "residual");
  CHECK(trained[0].report.contains("readout_inf_norm"));
  CHECK(trained[0].report.at("state_sup_error").get<double>() >= 0.0);

  // The gradient-error budget follows the residual-network formula.
  const BuiltInstance built = build_instance(config);
  DeltaMode mode = DeltaMode::kStateFeedforward;
  const double delta = resolve_delta(config, built, dir.path, &mode);
  CHECK(mode == DeltaMode::kStateResnet);
  const json& rep = trained[0].report;
  DeltaBudgetInputs in;
  in.l_hu = built.plant.lipschitz.l_hu;
  in.ell_x = built.cost.ell_x;
  in.n_xi = 4;
  in.sup_state_error = rep.at("state_sup_error").get<double>();
  in.omega_p = rep.at("omega_p").get<double>();
  in.a_inf_norm = rep.at("readout_inf_norm").get<double>();
  in.rho = 0.05;
  CHECK(delta == doctest::Approx(delta_budget(DeltaMode::kStateResnet, in)));

  // The closed loop runs with the projected-head estimator.
  const SimulateOutputs out = run_simulate(config, dir.path, false);
  CHECK(out.steady_state_err < 1.0);
}

TEST_CASE("residual cost surrogate budget follows the lifted-map formula") {
  TempDir dir("resnet-cost");
  json j = json::parse(R"({
    "name": "unit-sis-cost-resnet",
    "seed": 9,
    "plant": {"kind": "sis"},
    "cost": {"kind": "quadratic_tracking", "u_ref": [0.36], "x_ref": [0.85]},
    "controller": {
      "mode": "cost_perception", "eta_fraction": 0.5, "epsilon": 0.05,
      "phi": {"source": "analytic"},
      "psi": {"source": "surrogate", "m3": 0.0}
    },
    "disturbance": {"kind": "constant", "value": [0.0]},
    "stepper": {"dt": 0.001, "t0": 0.0, "t1": 20.0, "record_every": 100},
    "initial_state": [0.7],
    "initial_input": [3.0],
    "training": {
      "target": "psi",
      "x_train": {"lower": [0.6], "upper": [1.0]},
      "samples": 60,
      "net": {"kind": "residual", "width": 1, "blocks": 2, "block_hidden": 8},
      "epochs": 200, "batch": 16, "learning_rate": 0.01,
      "cover": {"rho": 0.05, "mode": "partial_order", "probes_per_dim": 15}
    },
    "certificate": {"s": 0.5, "r0": 0.5, "lyapunov": {"source": "analytic-lti"},
                    "operating_input": "optimal"},
    "tail_fraction": 0.2
  })");
  const ExperimentConfig config = ExperimentConfig::from_json(j);
  const auto trained = run_train(config, dir.path);
  const json& rep = trained[0].report;
  const BuiltInstance built = build_instance(config);
  DeltaMode mode = DeltaMode::kCostFeedforward;
  const double delta = resolve_delta(config, built, dir.path, &mode);
  CHECK(mode == DeltaMode::kCostResnet);

  DeltaBudgetInputs in;
  in.epsilon = 0.05;
  in.n_u = 1;
  in.n = 1;
  in.l_hu = built.plant.lipschitz.l_hu;
  in.sup_psi_error = rep.at("sup_training_error").get<double>();
  in.omega_psi = rep.at("omega_p").get<double>();
  in.a_x_inf_norm = rep.at("readout_inf_norm").get<double>();
  in.rho_x = 0.05;
  CHECK(delta == doctest::Approx(delta_budget(DeltaMode::kCostResnet, in)));

  // The closed loop runs with the first-component read-out.
  const SimulateOutputs out = run_simulate(config, dir.path, false);
  CHECK(std::isfinite(out.steady_state_err));
}

TEST_CASE("simulate reports missing weights as a config error") {
  TempDir dir("missing-weights");
  json j = lti_config_json();
  j["controller"] = {{"mode", "state_perception"}, {"eta_fraction", 0.5}};
  j["training"] = {{"target", "state"},
                   {"generative", {{"kind", "gaussian_basis"}, {"means", {1.0}}, {"variance", 1.0}}},
                   {"x_train", {{"lower", {0.0, 0.0}}, {"upper", {1.0, 1.0}}}},
                   {"samples", 10},
                   {"net", {{"kind", "mlp"}, {"widths", {1, 4, 2}}}}};
  const ExperimentConfig config = ExperimentConfig::from_json(j);
  CHECK_THROWS_AS(run_simulate(config, dir.path, false), ConfigError);
}

TEST_CASE("sweep rejects single-value axes and records member failures") {
  TempDir dir("sweep");
  json j = lti_config_json();
  j["controller"] = {{"mode", "injected_error"}, {"eta_fraction", 0.5}, {"delta", 0.0}};
  j["sweep"] = {{"axis", "delta"}, {"values", {0.05}}};
  CHECK_THROWS_AS(run_sweep(ExperimentConfig::from_json(j), dir.path), ConfigError);

  j["sweep"]["values"] = {0.0, 0.05};
  const SweepOutputs out = run_sweep(ExperimentConfig::from_json(j), dir.path);
  REQUIRE(out.cells.size() == 2);
  CHECK(out.cells[0].status == "ok");
  CHECK(out.cells[1].status == "ok");
  CHECK(out.cells[1].steady_state_err >= out.cells[0].steady_state_err - 1e-12);
  CHECK(fs::exists(out.csv_file));
}
