#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "gradflow/controller.hpp"
#include "gradflow/numerics.hpp"
#include "gradflow/objective.hpp"
#include "gradflow/perception.hpp"
#include "gradflow/plants.hpp"

namespace gradflow {

std::uint64_t fnv1a64(const std::string& bytes);

// One experiment = one JSON document. Field reference lives in the README;
// unknown plants/costs/modes are rejected at build time.
struct ExperimentConfig {
  nlohmann::json raw;
  std::string name;
  std::uint64_t seed = 0;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_json(nlohmann::json j);

  // Hash of the canonical full document (reproducibility stamp).
  std::uint64_t full_hash() const;
  // Hash of the plant/cost/region subtree (certificate <-> trajectory match).
  std::uint64_t instance_hash() const;

  bool has(const std::string& key) const { return raw.contains(key); }
  const nlohmann::json& at(const std::string& key) const;
};

// Plant, cost, disturbance, horizon and initial conditions; everything the
// exact-mode loop needs.
struct BuiltInstance {
  PlantSpec plant;
  CostSpec cost;
  DisturbanceSignal disturbance = DisturbanceSignal::constant(Vec::Zero(1));
  StepperConfig stepper;
  Vec x0;
  Vec u0;
};

Vec vec_from_json(const nlohmann::json& j);
Mat mat_from_json(const nlohmann::json& j);
nlohmann::json vec_to_json(const Vec& v);

ConvexRegion region_from_json(const nlohmann::json& j);

BuiltInstance build_instance(const ExperimentConfig& config);

// The generative map declared in the training section.
struct GenerativeMapHandle {
  std::variant<GaussianBasisMap, RobotImageMap> map;

  Vec operator()(const Vec& x) const;
  Eigen::Index output_dim() const;
  bool is_classifier() const { return std::holds_alternative<RobotImageMap>(map); }
  const RobotImageMap& robot_image() const { return std::get<RobotImageMap>(map); }
};

GenerativeMapHandle generative_map_from_json(const nlohmann::json& j);

// State estimator x_hat(xi) for the perception controller: direct regression
// for basis maps, argmax label decoding for the image classifier.
std::function<Vec(const Vec&)> make_state_estimator(const GenerativeMapHandle& map,
                                                    std::shared_ptr<Net> net,
                                                    Eigen::Index state_dim);

}  // namespace gradflow
