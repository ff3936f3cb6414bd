#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gradflow/errors.hpp"
#include "gradflow/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCertification = 4;

fs::path find_recipe(const std::string& recipe) {
  std::vector<fs::path> candidates;
  if (const char* env = std::getenv("GRADFLOW_CONFIG_DIR")) candidates.emplace_back(env);
  candidates.emplace_back("configs");
#ifdef GRADFLOW_SOURCE_CONFIG_DIR
  candidates.emplace_back(GRADFLOW_SOURCE_CONFIG_DIR);
#endif
  for (const fs::path& dir : candidates) {
    const fs::path file = dir / (recipe + ".json");
    if (fs::exists(file)) return file;
  }
  throw gradflow::ConfigError("recipe '" + recipe + "' not found (looked for " + recipe +
                              ".json under $GRADFLOW_CONFIG_DIR, ./configs and the shipped "
                              "configs directory)");
}

gradflow::ExperimentConfig load_with_overrides(const std::string& config_path,
                                               bool seed_set, std::uint64_t seed) {
  gradflow::ExperimentConfig config = gradflow::ExperimentConfig::from_file(config_path);
  if (seed_set) {
    config.raw["seed"] = seed;
    config = gradflow::ExperimentConfig::from_json(std::move(config.raw));
  }
  return config;
}

void print_summary(const gradflow::SimulateOutputs& out) {
  std::cout << "steady-state error: " << out.steady_state_err << "\n"
            << "fitted decay rate:  " << out.decay_rate << "\n";
  if (out.bound_report) {
    std::cout << "envelope holds:     " << (out.bound_report->holds ? "yes" : "NO")
              << " (max violation " << out.bound_report->max_violation << ")\n";
  }
  std::cout << "trajectory: " << out.trajectory_file.string() << "\n"
            << "summary:    " << out.summary_file.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback optimization of dynamical systems with learned perception:\n"
               "closed-loop simulation, network training, and ISS certification."};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool plot = false;
  std::string sweep_axis;
  std::string recipe;

  const auto add_common = [&](CLI::App* cmd, bool config_required) {
    auto* opt = cmd->add_option("--config", config_path, "experiment config file (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { seed_set = true; });
    cmd->add_flag("--plot", plot, "write SVG plots");
  };

  CLI::App* cmd_train = app.add_subcommand("train", "build the training set and train the nets");
  add_common(cmd_train, true);
  CLI::App* cmd_simulate = app.add_subcommand("simulate", "run the closed loop");
  add_common(cmd_simulate, true);
  CLI::App* cmd_certify = app.add_subcommand("certify", "emit the ISS certificate");
  add_common(cmd_certify, true);
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "run independent simulations over one axis");
  add_common(cmd_sweep, true);
  cmd_sweep->add_option("--axis", sweep_axis, "eta, delta, epsilon or samples");
  CLI::App* cmd_reproduce =
      app.add_subcommand("reproduce", "train + certify + simulate a shipped recipe");
  cmd_reproduce->add_option("recipe", recipe, "recipe name, e.g. sis-exact")->required();
  add_common(cmd_reproduce, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_reproduce->parsed() && config_path.empty()) {
      config_path = find_recipe(recipe).string();
    }
    const gradflow::ExperimentConfig config = load_with_overrides(config_path, seed_set, seed);
    const fs::path out{out_dir};

    if (cmd_train->parsed()) {
      const auto outputs = gradflow::run_train(config, out);
      for (const auto& o : outputs) {
        std::cout << "trained " << o.report.at("target").get<std::string>()
                  << ": final loss " << o.report.at("final_loss").get<double>()
                  << ", sup training error " << o.report.at("sup_training_error").get<double>()
                  << "\n  weights: " << o.weights_file.string() << "\n";
      }
    } else if (cmd_simulate->parsed()) {
      print_summary(gradflow::run_simulate(config, out, plot));
    } else if (cmd_certify->parsed()) {
      const auto certified = gradflow::run_certify(config, out);
      std::cout << "eta* = " << certified.certificate.eta_ceiling
                << ", eta = " << certified.certificate.eta
                << ", kappa = (" << certified.certificate.constants.kappa1 << ", "
                << certified.certificate.constants.kappa2 << ", "
                << certified.certificate.constants.kappa3 << ")"
                << ", delta = " << certified.certificate.delta << "\n"
                << "certificate: " << certified.certificate_file.string() << "\n";
    } else if (cmd_sweep->parsed()) {
      const auto swept = gradflow::run_sweep(config, out, sweep_axis, plot);
      for (const auto& cell : swept.cells) {
        std::cout << swept.axis << " = " << cell.value << ": ";
        if (cell.status == "ok") {
          std::cout << "steady-state error " << cell.steady_state_err << "\n";
        } else {
          std::cout << "FAILED: " << cell.status << "\n";
        }
      }
      std::cout << "sweep CSV: " << swept.csv_file.string() << "\n";
    } else if (cmd_reproduce->parsed()) {
      print_summary(gradflow::reproduce(config, out, plot));
    }
  } catch (const gradflow::CertificationError& e) {
    std::cerr << "certification refusal: " << e.what() << "\n";
    return kExitCertification;
  } catch (const gradflow::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const gradflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
