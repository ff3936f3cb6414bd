#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "gradflow/certification.hpp"
#include "gradflow/config.hpp"

namespace gradflow {

// Minimal structural validator for the shipped JSON schemas (supports the
// type / properties / required / items subset used there).
void validate_schema(const nlohmann::json& doc, const nlohmann::json& schema,
                     const std::string& where = "$");

struct TrainOutputs {
  std::filesystem::path weights_file;
  std::filesystem::path report_file;
  nlohmann::json report;
};

struct CertifyOutputs {
  IssCertificate certificate;
  std::filesystem::path certificate_file;
  nlohmann::json report;
};

struct SimulateOutputs {
  Trajectory trajectory;
  double steady_state_err = 0.0;
  double decay_rate = 0.0;
  std::optional<BoundReport> bound_report;
  std::filesystem::path trajectory_file;
  std::filesystem::path summary_file;
  nlohmann::json summary;
};

struct SweepCell {
  double value = 0.0;
  double steady_state_err = 0.0;
  double min_margin = 0.0;     // envelope minus error, when certified
  bool has_margin = false;
  std::string status;          // "ok" or the failure message
};

struct SweepOutputs {
  std::string axis;
  std::vector<SweepCell> cells;
  std::filesystem::path csv_file;
};

// Trains every entry of the config's training section; writes weight files,
// training-set CSVs and training reports into out_dir.
std::vector<TrainOutputs> run_train(const ExperimentConfig& config,
                                    const std::filesystem::path& out_dir);

// Assembles the ISS certificate (gain ceiling, constants, delta budget) and
// writes it as JSON. Throws CertificationError when eta >= eta*.
CertifyOutputs run_certify(const ExperimentConfig& config,
                           const std::filesystem::path& out_dir);

// Runs the closed loop, writes trajectory CSV + summary JSON (+ SVG plots),
// verifying the envelope when a certificate section is present.
SimulateOutputs run_simulate(const ExperimentConfig& config,
                             const std::filesystem::path& out_dir, bool plot);

// Independent runs across one axis (eta, delta, epsilon, samples); member
// failures are recorded per cell and the sweep continues.
SweepOutputs run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                       const std::string& axis_override = "", bool plot = false);

// train (when configured) + certify (when configured) + simulate.
SimulateOutputs reproduce(const ExperimentConfig& config,
                          const std::filesystem::path& out_dir, bool plot);

// --- pieces reused by tests -------------------------------------------------

// Certificate inputs assembled from the instance (Lyapunov path, smoothness,
// empirical l_J). Writes nothing.
CertificateInputs certificate_inputs(const ExperimentConfig& config,
                                     const BuiltInstance& built,
                                     std::string* lyapunov_note = nullptr);

// eta from the config: explicit value, or eta_fraction * eta_star.
double resolve_eta(const ExperimentConfig& config, const BuiltInstance& built);

// The gradient-error budget delta for the configured controller mode, using
// measured training errors from out_dir's training reports.
double resolve_delta(const ExperimentConfig& config, const BuiltInstance& built,
                     const std::filesystem::path& out_dir, DeltaMode* mode_out = nullptr);

ControllerConfig build_controller(const ExperimentConfig& config, const BuiltInstance& built,
                                  const std::filesystem::path& out_dir);

std::filesystem::path weights_path(const std::filesystem::path& out_dir,
                                   const std::string& name, const std::string& target);
std::filesystem::path train_report_path(const std::filesystem::path& out_dir,
                                        const std::string& name, const std::string& target);

}  // namespace gradflow
