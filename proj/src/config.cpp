#include "gradflow/config.hpp"

#include <fstream>

#include "gradflow/errors.hpp"

namespace gradflow {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(std::move(j));
}

ExperimentConfig ExperimentConfig::from_json(json j) {
  ExperimentConfig config;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("seed")) {
    throw ConfigError("config must declare a seed (reproducibility is mandatory)");
  }
  config.seed = j.at("seed").get<std::uint64_t>();
  config.name = j.value("name", std::string("experiment"));
  config.raw = std::move(j);
  return config;
}

std::uint64_t ExperimentConfig::full_hash() const { return fnv1a64(raw.dump()); }

std::uint64_t ExperimentConfig::instance_hash() const {
  json sub = json::object();
  for (const char* key : {"plant", "cost", "region"}) {
    if (raw.contains(key)) sub[key] = raw.at(key);
  }
  return fnv1a64(sub.dump());
}

const json& ExperimentConfig::at(const std::string& key) const {
  if (!raw.contains(key)) throw ConfigError("config is missing the '" + key + "' section");
  return raw.at(key);
}

Vec vec_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("expected a JSON array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Mat mat_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("expected a JSON array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(r)].size()) != cols) {
      throw ConfigError("matrix rows have inconsistent lengths");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

json vec_to_json(const Vec& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

ConvexRegion region_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "box") {
    return ConvexRegion::box(vec_from_json(j.at("lower")), vec_from_json(j.at("upper")));
  }
  if (kind == "ball") {
    return ConvexRegion::ball(vec_from_json(j.at("center")), j.at("radius").get<double>());
  }
  if (kind == "halfspaces") {
    return ConvexRegion::halfspaces(mat_from_json(j.at("normals")),
                                    vec_from_json(j.at("offsets")));
  }
  throw ConfigError("unknown region kind '" + kind + "'");
}

namespace {

PlantSpec plant_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "lti") {
    const Mat A = mat_from_json(j.at("A"));
    const Mat B = mat_from_json(j.at("B"));
    const Mat E = j.contains("E") ? mat_from_json(j.at("E")) : Mat::Zero(A.rows(), 1);
    return lti_plant(A, B, E);
  }
  if (kind == "sis") {
    SisParameters p;
    p.beta = j.value("beta", p.beta);
    p.gamma = j.value("gamma", p.gamma);
    p.mu = j.value("mu", p.mu);
    return sis_plant(p);
  }
  if (kind == "unicycle") {
    return stabilized_unicycle(j.value("k", 1.0));
  }
  throw ConfigError("unknown plant kind '" + kind + "'");
}

ConvexRegion default_region(const ExperimentConfig& config, const PlantSpec& plant) {
  if (config.has("region")) return region_from_json(config.at("region"));
  if (plant.name == "sis") {
    const json& pj = config.at("plant");
    SisParameters p;
    p.beta = pj.value("beta", p.beta);
    p.gamma = pj.value("gamma", p.gamma);
    p.mu = pj.value("mu", p.mu);
    const double margin = pj.value("input_margin", 0.95);
    Vec lo(1), hi(1);
    lo(0) = 1.0;
    hi(0) = p.input_upper(margin);
    return ConvexRegion::box(lo, hi);
  }
  throw ConfigError("config needs a 'region' section for plant '" + plant.name + "'");
}

CostSpec cost_from_json(const ExperimentConfig& config, const PlantSpec& plant,
                        ConvexRegion region) {
  const json& j = config.at("cost");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "quadratic_tracking") {
    throw ConfigError("unknown cost kind '" + kind + "'");
  }
  Vec u_ref = vec_from_json(j.at("u_ref"));
  const Vec x_ref = vec_from_json(j.at("x_ref"));
  if (plant.name == "sis") {
    // The controller runs in the transformed coordinates (x, 1/u). By default
    // input references declared in original units are mapped to 1/u_ref.
    const std::string convention = j.value("reference_convention", std::string("reciprocal"));
    if (convention == "reciprocal") {
      for (Eigen::Index i = 0; i < u_ref.size(); ++i) {
        if (!(u_ref(i) > 0.0)) throw ConfigError("sis cost: u_ref must be positive");
        u_ref(i) = 1.0 / u_ref(i);
      }
    } else if (convention != "direct") {
      throw ConfigError("sis cost: reference_convention must be reciprocal or direct");
    }
  }
  CostSpec cost = quadratic_tracking_cost(j.value("w_phi", 1.0), u_ref, j.value("w_psi", 1.0),
                                          x_ref, plant, std::move(region));
  if (j.contains("mu_u")) cost.mu_u = j.at("mu_u").get<double>();
  return cost;
}

DisturbanceSignal disturbance_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return DisturbanceSignal::constant(vec_from_json(j.at("value")));
  if (kind == "sinusoid") {
    return DisturbanceSignal::sinusoid(vec_from_json(j.at("mean")),
                                       vec_from_json(j.at("amplitude")),
                                       j.at("angular_frequency").get<double>());
  }
  if (kind == "piecewise_constant") {
    std::vector<Vec> values;
    for (const json& v : j.at("values")) values.push_back(vec_from_json(v));
    return DisturbanceSignal::piecewise_constant(
        j.at("breakpoints").get<std::vector<double>>(), std::move(values),
        j.value("ramp", 0.1));
  }
  throw ConfigError("unknown disturbance kind '" + kind + "'");
}

StepperConfig stepper_from_json(const json& j) {
  StepperConfig s;
  s.dt = j.value("dt", s.dt);
  s.t0 = j.value("t0", s.t0);
  s.t1 = j.value("t1", s.t1);
  s.record_every = j.value("record_every", s.record_every);
  s.validate();
  return s;
}

}  // namespace

BuiltInstance build_instance(const ExperimentConfig& config) {
  BuiltInstance built;
  built.plant = plant_from_json(config.at("plant"));
  ConvexRegion region = default_region(config, built.plant);
  built.cost = cost_from_json(config, built.plant, std::move(region));

  if (config.has("disturbance")) {
    built.disturbance = disturbance_from_json(config.at("disturbance"));
  } else {
    built.disturbance = DisturbanceSignal::constant(Vec::Zero(built.plant.n_w));
  }
  if (built.disturbance.dim() != built.plant.n_w) {
    throw ConfigError("disturbance dimension does not match the plant");
  }

  built.stepper = stepper_from_json(config.at("stepper"));

  if (!config.has("initial_input")) throw ConfigError("config is missing 'initial_input'");
  built.u0 = vec_from_json(config.at("initial_input"));
  if (built.u0.size() != built.plant.n_u) {
    throw ConfigError("initial_input dimension does not match the plant");
  }

  const json& x0j = config.at("initial_state");
  if (x0j.is_string() && x0j.get<std::string>() == "equilibrium") {
    built.x0 = built.plant.steady_state(built.u0, built.disturbance(built.stepper.t0));
  } else {
    built.x0 = vec_from_json(x0j);
  }
  if (built.x0.size() != built.plant.n) {
    throw ConfigError("initial_state dimension does not match the plant");
  }
  return built;
}

Vec GenerativeMapHandle::operator()(const Vec& x) const {
  if (const auto* basis = std::get_if<GaussianBasisMap>(&map)) return (*basis)(x);
  const auto& image = std::get<RobotImageMap>(map);
  // State layout (a, b, theta); the rendered image encodes position only.
  return image.render(Eigen::Vector2d(x(0), x(1)), x.size() > 2 ? x(2) : 0.0);
}

Eigen::Index GenerativeMapHandle::output_dim() const {
  if (const auto* basis = std::get_if<GaussianBasisMap>(&map)) return basis->output_dim();
  return std::get<RobotImageMap>(map).output_dim();
}

GenerativeMapHandle generative_map_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian_basis") {
    GaussianBasisMap basis;
    for (const json& m : j.at("means")) {
      basis.means.push_back(m.is_array() ? vec_from_json(m) : Vec::Constant(1, m.get<double>()));
    }
    const json& var = j.at("variance");
    basis.variance = var.is_array() ? vec_from_json(var)
                                    : Vec::Constant(basis.means.front().size(), var.get<double>());
    for (Eigen::Index i = 0; i < basis.variance.size(); ++i) {
      if (!(basis.variance(i) > 0.0)) throw ConfigError("gaussian basis variance must be positive");
    }
    return {basis};
  }
  if (kind == "robot_image") {
    RobotImageMap image;
    image.grid = j.value("grid", image.grid);
    image.blur_radius = j.value("blur_radius", image.blur_radius);
    if (j.contains("arena")) {
      const json& arena = j.at("arena");
      image.arena_lo = arena.at(0).get<double>();
      image.arena_hi = arena.at(1).get<double>();
    }
    if (image.grid < 4) throw ConfigError("robot image grid must be at least 4");
    if (!(image.arena_hi > image.arena_lo)) throw ConfigError("robot image arena is empty");
    return {image};
  }
  throw ConfigError("unknown generative map kind '" + kind + "'");
}

std::function<Vec(const Vec&)> make_state_estimator(const GenerativeMapHandle& map,
                                                    std::shared_ptr<Net> net,
                                                    Eigen::Index state_dim) {
  if (map.is_classifier()) {
    const RobotImageMap image = map.robot_image();
    return [net = std::move(net), image, state_dim](const Vec& xi) -> Vec {
      const Vec logits = net->forward(xi);
      Eigen::Index best = 0;
      logits.maxCoeff(&best);
      const Eigen::Vector2d position = image.cell_center(static_cast<int>(best));
      Vec x = Vec::Zero(state_dim);
      x(0) = position(0);
      x(1) = position(1);
      return x;
    };
  }
  return [net = std::move(net), state_dim](const Vec& xi) -> Vec {
    Vec x = net->forward(xi);
    if (x.size() < state_dim) {
      throw NumericError("perception net output dimension does not cover the state");
    }
    // Lifted maps carry zero-padded tails; the state is the head block.
    if (x.size() > state_dim) return project_head(x, state_dim);
    return x;
  };
}

}  // namespace gradflow
