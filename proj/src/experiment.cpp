#include "gradflow/experiment.hpp"

#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include "gradflow/errors.hpp"
#include "gradflow/rng.hpp"
#include "gradflow/surrogate_gradient.hpp"
#include "gradflow/svg.hpp"

namespace gradflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex_hash(std::uint64_t h) {
  std::ostringstream os;
  os << "0x" << std::hex << h;
  return os.str();
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path.string());
  json j;
  in >> j;
  return j;
}

// Training entries may be a single object or an array of objects.
std::vector<json> training_entries(const ExperimentConfig& config) {
  if (!config.has("training")) return {};
  const json& t = config.at("training");
  if (t.is_array()) return std::vector<json>(t.begin(), t.end());
  return {t};
}

std::optional<json> training_entry(const ExperimentConfig& config, const std::string& target) {
  for (const json& entry : training_entries(config)) {
    if (entry.value("target", "") == target) return std::make_optional(entry);
  }
  return std::nullopt;
}

BoxRegion box_from_training(const json& entry, const char* key = "x_train") {
  const json& b = entry.at(key);
  return BoxRegion{vec_from_json(b.at("lower")), vec_from_json(b.at("upper"))};
}

std::unique_ptr<Net> net_from_config(const json& net_cfg, std::uint64_t seed) {
  const std::string kind = net_cfg.value("kind", "mlp");
  const Activation act = activation_from_string(net_cfg.value("activation", "tanh"));
  if (kind == "mlp") {
    return std::make_unique<Mlp>(net_cfg.at("widths").get<std::vector<Eigen::Index>>(), act,
                                 seed);
  }
  if (kind == "residual") {
    return std::make_unique<ResidualNet>(net_cfg.at("width").get<Eigen::Index>(),
                                         net_cfg.value("blocks", 2),
                                         net_cfg.value("block_hidden", Eigen::Index{16}), act,
                                         seed);
  }
  throw ConfigError("unknown net kind '" + kind + "'");
}

// Scalar read-out of a cost surrogate: first component per the residual
// lifting convention; plain scalar output for feedforward nets.
std::function<double(const Vec&)> scalar_readout(std::shared_ptr<Net> net) {
  return [net = std::move(net)](const Vec& x) -> double { return net->forward(x)(0); };
}

struct TrainingData {
  TrainingSet set;
  std::vector<Vec> raw_states;         // pre-image points (state target)
  GenerativeMapHandle generative;
  bool has_generative = false;
};

TrainingData build_training_data(const ExperimentConfig& config, const BuiltInstance& built,
                                 const json& entry) {
  const std::string target = entry.at("target").get<std::string>();
  TrainingData data;
  data.set.seed = entry.value("train_seed", config.seed);
  Rng rng(data.set.seed);

  if (target == "state") {
    data.generative = generative_map_from_json(entry.at("generative"));
    data.has_generative = true;
    if (data.generative.is_classifier()) {
      const RobotImageMap& image = data.generative.robot_image();
      const json samples_cfg = entry.value("samples", json("all_cells"));
      if (samples_cfg.is_string()) {
        if (samples_cfg.get<std::string>() != "all_cells") {
          throw ConfigError("training samples must be a count or 'all_cells'");
        }
        for (int label = 0; label < image.label_count(); ++label) {
          const Eigen::Vector2d center = image.cell_center(label);
          Vec x(2);
          x << center(0), center(1);
          data.raw_states.push_back(x);
          data.set.inputs.push_back(image.render(center, 0.0));
          Vec one_hot = Vec::Zero(image.label_count());
          one_hot(label) = 1.0;
          data.set.targets.push_back(one_hot);
        }
      } else {
        const long n = samples_cfg.get<long>();
        if (n < 1) throw ConfigError("training needs at least one sample");
        for (long i = 0; i < n; ++i) {
          Vec x(2);
          x << rng.uniform(image.arena_lo, image.arena_hi),
              rng.uniform(image.arena_lo, image.arena_hi);
          data.raw_states.push_back(x);
          data.set.inputs.push_back(image.render({x(0), x(1)}, 0.0));
          Vec one_hot = Vec::Zero(image.label_count());
          one_hot(image.label_of(x(0), x(1))) = 1.0;
          data.set.targets.push_back(one_hot);
        }
      }
      std::ostringstream os;
      os << "arena[" << image.arena_lo << "," << image.arena_hi << "]^2 grid=" << image.grid;
      data.set.region = os.str();
      return data;
    }
    // Regression from observations to the sampled states over X_train.
    const BoxRegion box = box_from_training(entry);
    const long n = entry.at("samples").get<long>();
    if (n < 1) throw ConfigError("training needs at least one sample");
    for (long i = 0; i < n; ++i) {
      Vec x(box.lower.size());
      for (Eigen::Index d = 0; d < x.size(); ++d) x(d) = rng.uniform(box.lower(d), box.upper(d));
      data.raw_states.push_back(x);
      data.set.inputs.push_back(data.generative(x));
      data.set.targets.push_back(x);
    }
    data.set.region = "x_train box";
    return data;
  }

  if (target == "psi" || target == "phi") {
    const long n = entry.at("samples").get<long>();
    if (n < 1) throw ConfigError("training needs at least one sample");
    BoxRegion box = target == "psi" ? box_from_training(entry)
                                    : built.cost.region.bounding_box();
    if (entry.contains("u_train")) box = box_from_training(entry, "u_train");
    for (long i = 0; i < n; ++i) {
      Vec x(box.lower.size());
      for (Eigen::Index d = 0; d < x.size(); ++d) x(d) = rng.uniform(box.lower(d), box.upper(d));
      data.raw_states.push_back(x);
      data.set.inputs.push_back(x);
      Vec y(1);
      y(0) = target == "psi" ? built.cost.psi(x) : built.cost.phi(x);
      data.set.targets.push_back(y);
    }
    data.set.region = target == "psi" ? "x_train box" : "input region";
    return data;
  }
  throw ConfigError("unknown training target '" + target + "' (state, psi or phi)");
}

}  // namespace

void validate_schema(const json& doc, const json& schema, const std::string& where) {
  if (schema.contains("type")) {
    const std::string type = schema.at("type").get<std::string>();
    const bool ok = (type == "object" && doc.is_object()) ||
                    (type == "array" && doc.is_array()) ||
                    (type == "string" && doc.is_string()) ||
                    (type == "number" && doc.is_number()) ||
                    (type == "integer" && doc.is_number_integer()) ||
                    (type == "boolean" && doc.is_boolean()) ||
                    (type == "null" && doc.is_null());
    if (!ok) {
      throw ConfigError(where + ": expected " + type + ", got " + std::string(doc.type_name()));
    }
  }
  if (schema.contains("required")) {
    for (const json& key : schema.at("required")) {
      if (!doc.contains(key.get<std::string>())) {
        throw ConfigError(where + ": missing required field '" + key.get<std::string>() + "'");
      }
    }
  }
  if (schema.contains("properties") && doc.is_object()) {
    for (const auto& [key, sub] : schema.at("properties").items()) {
      if (doc.contains(key)) validate_schema(doc.at(key), sub, where + "." + key);
    }
  }
  if (schema.contains("items") && doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      validate_schema(doc[i], schema.at("items"), where + "[" + std::to_string(i) + "]");
    }
  }
}

fs::path weights_path(const fs::path& out_dir, const std::string& name,
                      const std::string& target) {
  return out_dir / (name + "." + target + ".weights.json");
}

fs::path train_report_path(const fs::path& out_dir, const std::string& name,
                           const std::string& target) {
  return out_dir / (name + "." + target + ".train.json");
}

std::vector<TrainOutputs> run_train(const ExperimentConfig& config, const fs::path& out_dir) {
  const std::vector<json> entries = training_entries(config);
  if (entries.empty()) throw ConfigError("config has no training section");
  fs::create_directories(out_dir);
  const BuiltInstance built = build_instance(config);

  std::vector<TrainOutputs> outputs;
  for (const json& entry : entries) {
    const std::string target = entry.at("target").get<std::string>();
    TrainingData data = build_training_data(config, built, entry);

    std::unique_ptr<Net> net =
        net_from_config(entry.at("net"), entry.value("net_seed", config.seed + 1));
    if (dynamic_cast<ResidualNet*>(net.get()) != nullptr &&
        data.set.targets.front().size() < net->output_dim()) {
      // Residual nets approximate the lifted map: states and scalar costs get
      // zero-padded, and consumers read the head block back out.
      for (Vec& t : data.set.targets) t = lift(t, net->output_dim());
    }
    if (entry.value("normalize_inputs", false)) {
      auto* mlp = dynamic_cast<Mlp*>(net.get());
      if (!mlp) {
        throw ConfigError("normalize_inputs is supported for feedforward nets only");
      }
      Vec lo = data.set.inputs.front();
      Vec hi = lo;
      for (const Vec& in : data.set.inputs) {
        lo = lo.cwiseMin(in);
        hi = hi.cwiseMax(in);
      }
      const Vec center = 0.5 * (lo + hi);
      const Vec scale = (0.5 * (hi - lo)).cwiseMax(1e-9);
      mlp->set_input_normalization(center, scale);
    }
    TrainOptions options;
    options.epochs = entry.value("epochs", 200);
    options.batch_size = entry.value("batch", 32);
    options.learning_rate = entry.value("learning_rate", 1e-3);
    options.seed = entry.value("train_seed", config.seed);
    const TrainReport train_report = train(*net, data.set, options);

    json report;
    report["schema"] = "gradflow-train-v1";
    report["name"] = config.name;
    report["target"] = target;
    report["seed"] = config.seed;
    report["config_hash"] = hex_hash(config.full_hash());
    report["samples"] = data.set.inputs.size();
    report["epochs"] = options.epochs;
    report["final_loss"] = train_report.final_loss;
    report["sup_training_error"] = sup_training_error(*net, data.set);
    report["net_kind"] = net->to_json().at("kind");
    if (const auto* res = dynamic_cast<const ResidualNet*>(net.get())) {
      report["readout_inf_norm"] = res->readout_inf_norm();
    }

    if (target == "state") {
      // Error in state units, the quantity the error budgets consume.
      double sup_state = 0.0;
      if (data.generative.is_classifier()) {
        const RobotImageMap& image = data.generative.robot_image();
        long misses = 0;
        for (std::size_t i = 0; i < data.set.inputs.size(); ++i) {
          const Vec logits = net->forward(data.set.inputs[i]);
          Eigen::Index best = 0;
          logits.maxCoeff(&best);
          const Eigen::Vector2d decoded = image.cell_center(static_cast<int>(best));
          const Vec err = (decoded - Eigen::Vector2d(data.raw_states[i](0),
                                                     data.raw_states[i](1)))
                              .cwiseAbs();
          sup_state = std::max(sup_state, err.maxCoeff());
          Eigen::Index truth = 0;
          data.set.targets[i].maxCoeff(&truth);
          if (truth != best) ++misses;
        }
        report["misclassified"] = misses;
        const double cell =
            (image.arena_hi - image.arena_lo) / image.cells_per_axis();
        report["quantization_sup_error"] = 0.5 * cell;
      } else {
        // Targets hold the (possibly lifted) state, so the training sup error
        // already is the state-space quantity the budgets consume.
        sup_state = sup_training_error(*net, data.set);
      }
      report["state_sup_error"] = sup_state;
    }

    if (entry.contains("cover")) {
      if (data.has_generative && data.generative.is_classifier()) {
        throw ConfigError("cover checks are supported for basis maps only");
      }
      const json& cov = entry.at("cover");
      const double rho = cov.at("rho").get<double>();
      const int per_dim = cov.value("probes_per_dim", 20);
      const BoxRegion box = entry.contains("u_train")
                                ? box_from_training(entry, "u_train")
                                : (target == "phi" ? built.cost.region.bounding_box()
                                                   : box_from_training(entry));
      // Dense grid over the sampling box; for state targets it maps through
      // the generative map to probe the observation manifold.
      std::vector<Vec> grid;
      grid.push_back(Vec::Zero(box.lower.size()));
      for (Eigen::Index d = 0; d < box.lower.size(); ++d) {
        std::vector<Vec> next;
        for (const Vec& g : grid) {
          for (int i = 0; i < per_dim; ++i) {
            Vec point = g;
            point(d) = box.lower(d) +
                       (box.upper(d) - box.lower(d)) * i / std::max(1, per_dim - 1);
            next.push_back(point);
          }
        }
        grid = std::move(next);
      }
      std::vector<Vec> probes;
      for (const Vec& g : grid) {
        probes.push_back(data.has_generative ? data.generative(g) : g);
      }
      const CoverMode mode = cov.value("mode", std::string("plain")) == "partial_order"
                                 ? CoverMode::kPartialOrder
                                 : CoverMode::kPlain;
      const CoverReport cover = check_rho_cover(data.set.inputs, probes, rho, mode);
      report["cover"] = {{"rho", rho},
                         {"mode", mode == CoverMode::kPlain ? "plain" : "partial_order"},
                         {"ok", cover.ok},
                         {"failures", cover.witness_failures.size()}};
      // Empirical modulus of continuity of the approximated map at the cover
      // radius: the inverse perception map for state targets, the (lifted)
      // cost for the others.
      report["omega_p"] = estimate_modulus(
          data.set.inputs, target == "state" ? data.raw_states : data.set.targets, rho);
    }

    TrainOutputs out;
    out.weights_file = weights_path(out_dir, config.name, target);
    out.report_file = train_report_path(out_dir, config.name, target);
    save_net(*net, out.weights_file.string(), report);
    save_training_set_csv(data.set,
                          (out_dir / (config.name + "." + target + ".trainset.csv")).string(),
                          "config_hash=" + hex_hash(config.full_hash()));
    write_json(report, out.report_file);
    out.report = std::move(report);
    outputs.push_back(std::move(out));
  }
  return outputs;
}

CertificateInputs certificate_inputs(const ExperimentConfig& config, const BuiltInstance& built,
                                     std::string* lyapunov_note) {
  if (!config.has("certificate")) {
    throw ConfigError("config has no certificate section");
  }
  const json& c = config.at("certificate");

  CertificateInputs in;
  in.s = c.value("s", 0.5);
  in.r0 = c.value("r0", 1.0);
  in.mu = built.cost.mu_u;
  in.ell = built.cost.composite_smoothness(built.plant);
  in.ell_y = c.contains("ell_y") ? c.at("ell_y").get<double>() : built.cost.ell_x;
  in.l_hu = built.plant.lipschitz.l_hu;
  in.l_hw = built.plant.lipschitz.l_hw;

  const json lyap = c.value("lyapunov", json{{"source", "analytic-lti"}});
  const std::string source = lyap.value("source", "analytic-lti");
  if (source == "user") {
    const auto d = lyap.at("d").get<std::vector<double>>();
    if (d.size() != 6) throw ConfigError("user Lyapunov constants need exactly d1..d6");
    in.lyapunov = {d[0], d[1], d[2], d[3], d[4], d[5], "user-supplied"};
  } else if (source == "analytic-lti") {
    const std::string plant_kind = config.at("plant").at("kind").get<std::string>();
    if (plant_kind == "lti") {
      const Mat A = mat_from_json(config.at("plant").at("A"));
      const Mat B = mat_from_json(config.at("plant").at("B"));
      const Mat E = config.at("plant").contains("E")
                        ? mat_from_json(config.at("plant").at("E"))
                        : Mat::Zero(A.rows(), 1);
      in.lyapunov = lti_lyapunov_constants(A, B, E);
    } else if (plant_kind == "sis") {
      // Linearize at the operating equilibrium and run the LTI path. This
      // certifies a local surrogate of the nonlinear plant.
      Vec u_op;
      const json op = c.value("operating_input", json("optimal"));
      if (op.is_string()) {
        OptimalTrajectoryMap oracle(built.cost, built.plant);
        u_op = oracle.solve(built.disturbance(built.stepper.t0)).u_star;
      } else {
        u_op = vec_from_json(op);
      }
      SisParameters p;
      const json& pj = config.at("plant");
      p.beta = pj.value("beta", p.beta);
      p.gamma = pj.value("gamma", p.gamma);
      p.mu = pj.value("mu", p.mu);
      const double cc = p.ratio();
      const double x_eq = 1.0 - cc * u_op(0);
      Mat A(1, 1), B(1, 1), E(1, 1);
      A(0, 0) = (p.gamma + p.mu) - p.beta / u_op(0);
      B(0, 0) = -(p.beta / (u_op(0) * u_op(0))) * (1.0 - x_eq) * x_eq;
      E(0, 0) = 0.0;
      in.lyapunov = lti_lyapunov_constants(A, B, E);
      in.lyapunov.provenance = "local-surrogate";
      if (lyapunov_note) {
        std::ostringstream os;
        os << "linearized at u_op = " << u_op(0) << " (x_eq = " << x_eq << ")";
        *lyapunov_note = os.str();
      }
    } else {
      throw ConfigError("analytic Lyapunov constants are available for lti and sis plants "
                        "only; supply user constants for plant '" + plant_kind + "'");
    }
  } else {
    throw ConfigError("unknown Lyapunov source '" + source + "'");
  }

  // Sensitivity of the optimal-trajectory map, estimated over the
  // disturbance values seen across the horizon.
  if (built.disturbance.is_constant()) {
    in.l_j = 0.0;
  } else {
    OptimalTrajectoryMap oracle(built.cost, built.plant);
    const int points = c.value("lj_grid", 17);
    std::vector<Vec> grid;
    for (int i = 0; i < points; ++i) {
      const double t = built.stepper.t0 +
                       (built.stepper.t1 - built.stepper.t0) * i / std::max(1, points - 1);
      grid.push_back(built.disturbance(t));
    }
    in.l_j = oracle.estimate_lj(grid);
  }
  return in;
}

double resolve_eta(const ExperimentConfig& config, const BuiltInstance& built) {
  const json& ctrl = config.at("controller");
  if (ctrl.contains("eta")) {
    const double eta = ctrl.at("eta").get<double>();
    if (!config.has("certificate")) {
      std::cerr << "[gradflow] warning: eta = " << eta
                << " taken as-is; no certificate section, gain ceiling unchecked\n";
    }
    return eta;
  }
  const double fraction = ctrl.value("eta_fraction", 0.5);
  if (!config.has("certificate")) {
    throw ConfigError("eta_fraction needs a certificate section to evaluate the gain ceiling");
  }
  return fraction * eta_star(certificate_inputs(config, built));
}

double resolve_delta(const ExperimentConfig& config, const BuiltInstance& built,
                     const fs::path& out_dir, DeltaMode* mode_out) {
  const json& ctrl = config.at("controller");
  const std::string mode = ctrl.at("mode").get<std::string>();
  if (mode == "exact") return 0.0;
  if (mode == "injected_error") return ctrl.value("delta", 0.0);

  if (mode == "state_perception") {
    const json report = read_json(train_report_path(out_dir, config.name, "state"));
    const auto entry = training_entry(config, "state");
    if (!entry) throw ConfigError("state_perception needs a 'state' training entry");
    DeltaBudgetInputs in;
    in.l_hu = built.plant.lipschitz.l_hu;
    in.ell_x = built.cost.ell_x;
    in.sup_state_error = report.at("state_sup_error").get<double>();
    if (report.value("net_kind", "mlp") == "residual") {
      const GenerativeMapHandle map = generative_map_from_json(entry->at("generative"));
      in.n_xi = map.output_dim();
      in.omega_p = report.at("omega_p").get<double>();
      in.a_inf_norm = report.at("readout_inf_norm").get<double>();
      in.rho = report.at("cover").at("rho").get<double>();
      if (mode_out) *mode_out = DeltaMode::kStateResnet;
      return delta_budget(DeltaMode::kStateResnet, in);
    }
    in.n = built.plant.n;
    if (mode_out) *mode_out = DeltaMode::kStateFeedforward;
    return delta_budget(DeltaMode::kStateFeedforward, in);
  }

  if (mode == "cost_perception") {
    DeltaBudgetInputs in;
    in.epsilon = ctrl.at("epsilon").get<double>();
    in.n_u = built.plant.n_u;
    in.n = built.plant.n;
    in.l_hu = built.plant.lipschitz.l_hu;
    bool residual = false;
    const auto load_side = [&](const char* side, double& sup_err, double& e_fd,
                               double& omega, double& a_inf) {
      const json s = ctrl.value(side, json{{"source", "analytic"}});
      if (s.value("source", "analytic") == "analytic") return;
      const json report = read_json(train_report_path(out_dir, config.name, side));
      sup_err = report.at("sup_training_error").get<double>();
      e_fd = fd_truncation_bound(s.value("m3", 0.0), in.epsilon,
                                 std::string(side) == "phi" ? in.n_u : in.n);
      if (report.value("net_kind", "mlp") == "residual") {
        residual = true;
        // The residual-network budget needs the cover radius and modulus.
        omega = report.at("omega_p").get<double>();
        a_inf = report.at("readout_inf_norm").get<double>();
        if (std::string(side) == "phi") {
          in.rho_u = report.at("cover").at("rho").get<double>();
        } else {
          in.rho_x = report.at("cover").at("rho").get<double>();
        }
      }
    };
    load_side("phi", in.sup_phi_error, in.e_u_fd, in.omega_phi, in.a_u_inf_norm);
    load_side("psi", in.sup_psi_error, in.e_x_fd, in.omega_psi, in.a_x_inf_norm);
    const DeltaMode m = residual ? DeltaMode::kCostResnet : DeltaMode::kCostFeedforward;
    if (mode_out) *mode_out = m;
    return delta_budget(m, in);
  }
  throw ConfigError("unknown controller mode '" + mode + "'");
}

ControllerConfig build_controller(const ExperimentConfig& config, const BuiltInstance& built,
                                  const fs::path& out_dir) {
  const json& ctrl = config.at("controller");
  ControllerConfig cc;
  cc.region = built.cost.region;
  cc.eta = resolve_eta(config, built);

  const std::string mode = ctrl.at("mode").get<std::string>();
  if (mode == "exact") {
    cc.mode = ExactMode{};
  } else if (mode == "injected_error") {
    cc.mode = InjectedErrorMode{ctrl.value("gamma", 0.0), ctrl.value("delta", 0.0)};
  } else if (mode == "state_perception") {
    const auto entry = training_entry(config, "state");
    if (!entry) throw ConfigError("state_perception needs a 'state' training entry");
    const GenerativeMapHandle map = generative_map_from_json(entry->at("generative"));
    const fs::path wfile = ctrl.contains("weights")
                               ? fs::path(ctrl.at("weights").get<std::string>())
                               : weights_path(out_dir, config.name, "state");
    if (!fs::exists(wfile)) {
      throw ConfigError("missing perception weights " + wfile.string() +
                        " (run the train command first)");
    }
    std::shared_ptr<Net> net = load_net(wfile.string());
    StatePerceptionMode sp;
    sp.observe = [map](const Vec& x) -> Vec { return map(x); };
    sp.estimate = make_state_estimator(map, std::move(net), built.plant.n);
    cc.mode = std::move(sp);
  } else if (mode == "cost_perception") {
    const double epsilon = ctrl.at("epsilon").get<double>();
    CostPerceptionMode cp;
    const auto make_side = [&](const char* side, Eigen::Index dim,
                               ConvexRegion core) -> std::function<Vec(const Vec&)> {
      const json s = ctrl.value(side, json{{"source", "analytic"}});
      if (s.value("source", "analytic") == "analytic") {
        if (std::string(side) == "phi") {
          return [&cost = built.cost](const Vec& u) { return cost.grad_phi(u); };
        }
        return [&cost = built.cost](const Vec& x) { return cost.grad_psi(x); };
      }
      const fs::path wfile = s.contains("weights")
                                 ? fs::path(s.at("weights").get<std::string>())
                                 : weights_path(out_dir, config.name, side);
      if (!fs::exists(wfile)) {
        throw ConfigError("missing cost surrogate weights " + wfile.string() +
                          " (run the train command first)");
      }
      std::shared_ptr<Net> net = load_net(wfile.string());
      auto grad = std::make_shared<SurrogateGradient>(scalar_readout(std::move(net)), epsilon,
                                                      dim, std::move(core));
      return [grad](const Vec& p) -> Vec { return (*grad)(p); };
    };
    // Training cores: C for phi, the psi training box for psi.
    ConvexRegion psi_core = ConvexRegion::all(built.plant.n);
    if (const auto entry = training_entry(config, "psi"); entry && entry->contains("x_train")) {
      const BoxRegion box = box_from_training(*entry);
      psi_core = ConvexRegion::box(box.lower, box.upper);
    }
    cp.grad_input_estimate = make_side("phi", built.plant.n_u, built.cost.region);
    cp.grad_state_estimate = make_side("psi", built.plant.n, std::move(psi_core));
    cc.mode = std::move(cp);
  } else {
    throw ConfigError("unknown controller mode '" + mode + "'");
  }
  return cc;
}

namespace {

struct CertificateBundle {
  IssCertificate cert;
  json report;
};

CertificateBundle build_certificate_bundle(const ExperimentConfig& config,
                                           const BuiltInstance& built,
                                           const fs::path& out_dir) {
  std::string lyapunov_note;
  CertificateInputs inputs = certificate_inputs(config, built, &lyapunov_note);
  const double eta = resolve_eta(config, built);
  const double gamma = config.at("certificate").value("gamma",
                                 config.at("controller").value("gamma", 0.0));
  DeltaMode delta_mode = DeltaMode::kStateFeedforward;
  const double delta = resolve_delta(config, built, out_dir, &delta_mode);
  const double esssup = built.disturbance.derivative_ess_sup();
  const double diam_u = built.cost.region.diameter();

  CertificateBundle bundle;
  bundle.cert = make_certificate(inputs, eta, gamma, delta, esssup, diam_u,
                                 config.instance_hash());

  json j;
  j["schema"] = "gradflow-certificate-v1";
  j["name"] = config.name;
  j["seed"] = config.seed;
  j["config_hash"] = hex_hash(config.full_hash());
  j["instance_hash"] = hex_hash(config.instance_hash());
  j["eta"] = eta;
  j["eta_star"] = bundle.cert.eta_ceiling;
  j["gamma"] = gamma;
  j["s"] = inputs.s;
  j["r0"] = inputs.r0;
  j["mu"] = {{"value", inputs.mu}, {"provenance", "analytic"}};
  j["ell"] = {{"value", inputs.ell}, {"provenance", "analytic"}};
  j["ell_y"] = {{"value", inputs.ell_y},
                {"provenance", config.at("certificate").contains("ell_y")
                                   ? "user-override"
                                   : "ell_x-default"}};
  j["l_hu"] = {{"value", inputs.l_hu}, {"provenance", "analytic"}};
  j["l_hw"] = {{"value", inputs.l_hw}, {"provenance", "analytic"}};
  j["l_j"] = {{"value", inputs.l_j}, {"provenance", "empirical"}};
  j["lyapunov"] = {{"d", {inputs.lyapunov.d1, inputs.lyapunov.d2, inputs.lyapunov.d3,
                          inputs.lyapunov.d4, inputs.lyapunov.d5, inputs.lyapunov.d6}},
                   {"provenance", inputs.lyapunov.provenance},
                   {"note", lyapunov_note}};
  const IssConstants& k = bundle.cert.constants;
  j["constants"] = {{"c0", k.c0},     {"c1", k.c1},         {"c2", k.c2},
                    {"c3", k.c3},     {"c4", k.c4},         {"c5", k.c5},
                    {"theta", k.theta}, {"kappa1", k.kappa1}, {"kappa2", k.kappa2},
                    {"kappa3", k.kappa3}, {"alpha", k.alpha}};
  j["delta"] = delta;
  j["delta_mode"] = to_string(delta_mode);
  j["ess_sup_wdot"] = esssup;
  j["diam_u"] = diam_u;
  j["region_radius"] = bundle.cert.region_radius;
  json warnings = json::array();
  if (!(bundle.cert.region_radius > 0.0)) {
    warnings.push_back("initial-condition region radius r' is nonpositive; the transient "
                       "bound premise cannot be verified for this delta/disturbance/diam(U)");
  }
  if (inputs.lyapunov.provenance == "local-surrogate") {
    warnings.push_back("Lyapunov constants certify a linearized surrogate of the nonlinear plant");
  }
  j["warnings"] = warnings;
  bundle.report = std::move(j);
  return bundle;
}

}  // namespace

CertifyOutputs run_certify(const ExperimentConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const BuiltInstance built = build_instance(config);
  CertificateBundle bundle = build_certificate_bundle(config, built, out_dir);
  CertifyOutputs out;
  out.certificate = bundle.cert;
  out.certificate_file = out_dir / (config.name + ".certificate.json");
  write_json(bundle.report, out.certificate_file);
  out.report = std::move(bundle.report);
  return out;
}

SimulateOutputs run_simulate(const ExperimentConfig& config, const fs::path& out_dir,
                             bool plot) {
  fs::create_directories(out_dir);
  const BuiltInstance built = build_instance(config);
  const ControllerConfig controller = build_controller(config, built, out_dir);

  SimulateOutputs out;
  out.trajectory = simulate_closed_loop(built.plant, built.cost, controller,
                                        built.disturbance, built.stepper, config.seed,
                                        built.x0, built.u0);
  out.trajectory.config_hash = config.full_hash();

  const double tail = config.raw.value("tail_fraction", 0.2);
  out.steady_state_err = steady_state_error(out.trajectory, tail);
  out.decay_rate = fitted_decay_rate(out.trajectory);

  json summary;
  summary["schema"] = "gradflow-summary-v1";
  summary["name"] = config.name;
  summary["seed"] = config.seed;
  summary["config_hash"] = hex_hash(config.full_hash());
  summary["instance_hash"] = hex_hash(config.instance_hash());
  summary["mode"] = controller.mode_name();
  summary["eta"] = controller.eta;
  summary["samples"] = out.trajectory.size();
  summary["horizon"] = {built.stepper.t0, built.stepper.t1};
  summary["steady_state_error"] = out.steady_state_err;
  summary["tail_fraction"] = tail;
  summary["fitted_decay_rate"] = out.decay_rate;
  summary["final_input"] = vec_to_json(out.trajectory.inputs.back());
  summary["final_state"] = vec_to_json(out.trajectory.states.back());

  if (config.has("certificate")) {
    CertificateBundle bundle = build_certificate_bundle(config, built, out_dir);
    // The theorem's initial-condition region: x(t0) within r' of the
    // equilibrium set. Checked against the reachable equilibrium at t0; not a
    // hard precondition, only reported.
    std::string d0_check = "ok";
    if (!(bundle.cert.region_radius > 0.0)) {
      d0_check = "empty-region";
    } else if ((built.x0 - built.plant.steady_state(built.u0,
                                                    built.disturbance(built.stepper.t0)))
                   .norm() > bundle.cert.region_radius) {
      d0_check = "not-verified";
    }
    if (d0_check != "ok") {
      std::cerr << "[gradflow] warning: initial state is outside the certificate's "
                   "admissible region (" << d0_check << "); the transient bound premise "
                   "is not verified\n";
    }
    summary["d0_check"] = d0_check;
    // The certificate binds to the plant/cost instance; the trajectory hash
    // is the full-config stamp, so match on the instance hash explicitly.
    Trajectory& traj = out.trajectory;
    const std::uint64_t full = traj.config_hash;
    traj.config_hash = config.instance_hash();
    out.bound_report = verify_bound(traj, bundle.cert, bundle.cert.delta,
                                    bundle.cert.ess_sup_wdot);
    attach_bound(traj, bundle.cert, bundle.cert.delta, bundle.cert.ess_sup_wdot);
    traj.config_hash = full;
    summary["bound"] = {{"delta", bundle.cert.delta},
                        {"ess_sup_wdot", bundle.cert.ess_sup_wdot},
                        {"kappa", {bundle.cert.constants.kappa1, bundle.cert.constants.kappa2,
                                   bundle.cert.constants.kappa3}},
                        {"alpha", bundle.cert.constants.alpha},
                        {"holds", out.bound_report->holds},
                        {"max_violation", out.bound_report->max_violation}};
  }

  out.trajectory_file = out_dir / (config.name + ".trajectory.csv");
  save_trajectory_csv(out.trajectory, out.trajectory_file.string());
  out.summary_file = out_dir / (config.name + ".summary.json");
  write_json(summary, out.summary_file);
  out.summary = std::move(summary);

  if (plot) {
    const Trajectory& traj = out.trajectory;
    const std::string stamp =
        "config_hash=" + hex_hash(config.full_hash()) + " seed=" + std::to_string(config.seed);
    SvgPlot states(config.name + ": states", "t", "x");
    states.set_comment(stamp);
    for (Eigen::Index i = 0; i < built.plant.n; ++i) {
      std::vector<double> xs, ys, ystar;
      for (std::size_t k = 0; k < traj.size(); ++k) {
        xs.push_back(traj.times[k]);
        ys.push_back(traj.states[k](i));
        ystar.push_back(traj.opt_states[k](i));
      }
      states.add_series("x" + std::to_string(i), xs, ys);
      states.add_series("x*" + std::to_string(i), xs, ystar);
    }
    states.write((out_dir / (config.name + ".states.svg")).string());

    SvgPlot inputs(config.name + ": inputs", "t", "u");
    inputs.set_comment(stamp);
    for (Eigen::Index i = 0; i < built.plant.n_u; ++i) {
      std::vector<double> xs, ys, ystar;
      for (std::size_t k = 0; k < traj.size(); ++k) {
        xs.push_back(traj.times[k]);
        ys.push_back(traj.inputs[k](i));
        ystar.push_back(traj.opt_inputs[k](i));
      }
      inputs.add_series("u" + std::to_string(i), xs, ys);
      inputs.add_series("u*" + std::to_string(i), xs, ystar);
    }
    inputs.write((out_dir / (config.name + ".inputs.svg")).string());

    SvgPlot error(config.name + ": tracking error", "t", "||z||");
    error.set_comment(stamp);
    error.set_log_y(true);
    error.add_series("||z||", traj.times, traj.tracking_error);
    if (!traj.bound.empty()) error.add_series("envelope", traj.times, traj.bound);
    error.write((out_dir / (config.name + ".error.svg")).string());
  }
  return out;
}

SweepOutputs run_sweep(const ExperimentConfig& config, const fs::path& out_dir,
                       const std::string& axis_override, bool plot) {
  fs::create_directories(out_dir);
  if (!config.has("sweep") && axis_override.empty()) {
    throw ConfigError("config has no sweep section and no axis was given");
  }
  const json sweep_cfg = config.has("sweep") ? config.at("sweep") : json::object();
  const std::string axis = !axis_override.empty()
                               ? axis_override
                               : sweep_cfg.at("axis").get<std::string>();
  if (axis != "eta" && axis != "delta" && axis != "epsilon" && axis != "samples") {
    throw ConfigError("sweep axis must be one of eta, delta, epsilon, samples");
  }
  if (!sweep_cfg.contains("values")) throw ConfigError("sweep needs a 'values' array");
  const auto values = sweep_cfg.at("values").get<std::vector<double>>();
  if (values.size() < 2) throw ConfigError("sweep needs at least 2 axis values");
  for (const double v : values) {
    if (!std::isfinite(v)) throw ConfigError("sweep axis values must be finite");
  }

  // Shared training artifacts for axes that reuse one trained net.
  if (axis != "samples" && config.has("training")) {
    bool missing = false;
    for (const json& entry : training_entries(config)) {
      if (!fs::exists(weights_path(out_dir, config.name,
                                   entry.at("target").get<std::string>()))) {
        missing = true;
      }
    }
    if (missing) run_train(config, out_dir);
  }

  const auto run_cell = [&](std::size_t index) -> SweepCell {
    SweepCell cell;
    cell.value = values[index];
    try {
      json raw = config.raw;
      fs::path cell_dir = out_dir;
      if (axis == "eta") {
        raw["controller"]["eta"] = cell.value;
        raw["controller"].erase("eta_fraction");
      } else if (axis == "delta") {
        if (raw.at("controller").at("mode").get<std::string>() != "injected_error") {
          throw ConfigError("delta sweeps need the injected_error controller mode");
        }
        raw["controller"]["delta"] = cell.value;
      } else if (axis == "epsilon") {
        raw["controller"]["epsilon"] = cell.value;
      } else {  // samples
        if (!raw.contains("training")) throw ConfigError("samples sweep needs training");
        const long n = static_cast<long>(cell.value);
        if (raw["training"].is_array()) {
          for (json& entry : raw["training"]) entry["samples"] = n;
        } else {
          raw["training"]["samples"] = n;
        }
        cell_dir = out_dir / ("cell-" + std::to_string(index));
        fs::create_directories(cell_dir);
      }
      const ExperimentConfig cell_config = ExperimentConfig::from_json(std::move(raw));
      if (axis == "samples") run_train(cell_config, cell_dir);

      const BuiltInstance built = build_instance(cell_config);
      const ControllerConfig controller = build_controller(cell_config, built, cell_dir);
      Trajectory traj = simulate_closed_loop(built.plant, built.cost, controller,
                                             built.disturbance, built.stepper,
                                             cell_config.seed, built.x0, built.u0);
      traj.config_hash = cell_config.instance_hash();
      cell.steady_state_err = steady_state_error(traj, cell_config.raw.value("tail_fraction", 0.2));
      if (cell_config.has("certificate")) {
        CertificateBundle bundle = build_certificate_bundle(cell_config, built, cell_dir);
        const BoundReport report =
            verify_bound(traj, bundle.cert, bundle.cert.delta, bundle.cert.ess_sup_wdot);
        double min_margin = std::numeric_limits<double>::infinity();
        for (const double m : report.margin) min_margin = std::min(min_margin, m);
        cell.min_margin = min_margin;
        cell.has_margin = true;
      }
      cell.status = "ok";
    } catch (const std::exception& e) {
      cell.status = e.what();
    }
    return cell;
  };

  SweepOutputs out;
  out.axis = axis;
  out.cells.resize(values.size());
  const unsigned workers =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(values.size())));
  std::vector<std::pair<std::size_t, std::future<SweepCell>>> futures;
  std::size_t next = 0;
  while (next < values.size() || !futures.empty()) {
    while (futures.size() < workers && next < values.size()) {
      futures.emplace_back(next, std::async(std::launch::async, run_cell, next));
      ++next;
    }
    for (auto& [index, future] : futures) out.cells[index] = future.get();
    futures.clear();
  }

  out.csv_file = out_dir / (config.name + ".sweep-" + axis + ".csv");
  std::ofstream csv(out.csv_file);
  if (!csv) throw ConfigError("cannot open sweep CSV for writing");
  csv << "# config_hash=" << std::hex << config.full_hash() << std::dec
      << " seed=" << config.seed << "\n";
  csv << "axis,value,steady_state_error,min_margin,status\n";
  csv.precision(17);
  for (const SweepCell& cell : out.cells) {
    csv << axis << "," << cell.value << "," << cell.steady_state_err << ","
        << (cell.has_margin ? cell.min_margin : std::nan("")) << ","
        << (cell.status == "ok" ? "ok" : "error") << "\n";
  }

  if (plot) {
    SvgPlot p(config.name + ": sweep over " + axis, axis, "steady-state error");
    p.set_comment("config_hash=" + hex_hash(config.full_hash()) +
                  " seed=" + std::to_string(config.seed));
    p.set_log_y(true);
    std::vector<double> xs, ys;
    for (const SweepCell& cell : out.cells) {
      if (cell.status != "ok") continue;
      xs.push_back(cell.value);
      ys.push_back(cell.steady_state_err);
    }
    p.add_series("steady-state error", xs, ys);
    p.write((out_dir / (config.name + ".sweep-" + axis + ".svg")).string());
  }
  return out;
}

SimulateOutputs reproduce(const ExperimentConfig& config, const fs::path& out_dir, bool plot) {
  fs::create_directories(out_dir);
  if (config.has("training")) run_train(config, out_dir);
  if (config.has("certificate")) run_certify(config, out_dir);
  return run_simulate(config, out_dir, plot);
}

}  // namespace gradflow
