#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gradflow/numerics.hpp"

namespace gradflow {

enum class Activation { kTanh, kRelu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  Mat W;
  Vec b;
};

// Flattened view of one parameter tensor, used by the trainer.
struct TensorRef {
  double* data = nullptr;
  Eigen::Index size = 0;
};

class Net {
 public:
  virtual ~Net() = default;
  virtual Vec forward(const Vec& x) const = 0;
  virtual Eigen::Index input_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;
  virtual std::vector<TensorRef> parameters() = 0;
  // Accumulates d(loss)/d(parameter) into grads (same order as parameters())
  // for one sample with upstream gradient dLdy at the output.
  virtual void backward(const Vec& x, const Vec& dLdy, std::vector<Vec>& grads) const = 0;
  virtual nlohmann::json to_json() const = 0;
  virtual std::unique_ptr<Net> clone() const = 0;
};

// Plain multilayer perceptron; the activation is applied to every layer but
// the last, which stays affine.
class Mlp final : public Net {
 public:
  Mlp(std::vector<Eigen::Index> widths, Activation activation, std::uint64_t seed);

  Vec forward(const Vec& x) const override;
  Eigen::Index input_dim() const override { return widths_.front(); }
  Eigen::Index output_dim() const override { return widths_.back(); }
  std::vector<TensorRef> parameters() override;
  void backward(const Vec& x, const Vec& dLdy, std::vector<Vec>& grads) const override;
  nlohmann::json to_json() const override;
  std::unique_ptr<Net> clone() const override { return std::make_unique<Mlp>(*this); }

  static Mlp from_json(const nlohmann::json& j);

  const std::vector<Eigen::Index>& widths() const { return widths_; }
  Activation activation() const { return activation_; }
  std::uint64_t seed() const { return seed_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Affine input standardization x -> (x - center) / scale applied before the
  // first layer; keeps activations centered for single-signed raw inputs.
  void set_input_normalization(Vec center, Vec scale);

  // Gradient of output w.r.t. the input (sum over dLdy); used by residual
  // blocks during backprop.
  Vec input_gradient(const Vec& x, const Vec& dLdy) const;

 private:
  Vec normalized(const Vec& x) const;

  std::vector<Eigen::Index> widths_;
  Activation activation_;
  std::uint64_t seed_ = 0;
  std::vector<DenseLayer> layers_;
  Vec input_center_;  // empty when normalization is off
  Vec input_scale_;
};

// Residual stack: y <- y + block(y) per block, then an affine read-out of the
// same width. The read-out's infinity norm is reported for the error budgets.
class ResidualNet final : public Net {
 public:
  ResidualNet(Eigen::Index width, int blocks, Eigen::Index block_hidden,
              Activation activation, std::uint64_t seed);

  Vec forward(const Vec& x) const override;
  Eigen::Index input_dim() const override { return width_; }
  Eigen::Index output_dim() const override { return width_; }
  std::vector<TensorRef> parameters() override;
  void backward(const Vec& x, const Vec& dLdy, std::vector<Vec>& grads) const override;
  nlohmann::json to_json() const override;
  std::unique_ptr<Net> clone() const override { return std::make_unique<ResidualNet>(*this); }

  static ResidualNet from_json(const nlohmann::json& j);

  double readout_inf_norm() const;  // ||A||_inf of the read-out matrix
  std::vector<Mlp>& blocks() { return blocks_; }
  DenseLayer& readout() { return readout_; }
  const DenseLayer& readout() const { return readout_; }

 private:
  Eigen::Index width_;
  Activation activation_;
  std::uint64_t seed_ = 0;
  std::vector<Mlp> blocks_;
  DenseLayer readout_;
};

std::unique_ptr<Net> net_from_json(const nlohmann::json& j);
void save_net(const Net& net, const std::string& path, const nlohmann::json& metadata);
std::unique_ptr<Net> load_net(const std::string& path, nlohmann::json* metadata = nullptr);

// --- Training ------------------------------------------------------------

struct TrainingSet {
  std::vector<Vec> inputs;
  std::vector<Vec> targets;
  std::string region;  // description of the sampling region
  std::uint64_t seed = 0;

  void validate() const;
};

void save_training_set_csv(const TrainingSet& data, const std::string& path,
                           const std::string& extra_comment = "");

struct TrainOptions {
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

struct TrainReport {
  double final_loss = 0.0;            // mean squared error over the full set
  std::vector<double> loss_curve;     // one entry per epoch
};

// Mini-batch adaptive-moment training on mean squared error; deterministic
// given the seed. Divergence aborts with the epoch index.
TrainReport train(Net& net, const TrainingSet& data, const TrainOptions& options);

// Max over samples of the componentwise-max absolute prediction error.
double sup_training_error(const Net& net, const TrainingSet& data);

// --- Generative maps -------------------------------------------------------

struct GaussianBasisMap {
  std::vector<Vec> means;
  Vec variance;  // diagonal, shared across basis elements

  Vec operator()(const Vec& x) const;
  Eigen::Index output_dim() const { return static_cast<Eigen::Index>(means.size()); }
};

// Deterministic synthetic overhead image: a 2x2 unit-intensity blob at the
// quantized cell of the position on a zero background, box-blurred.
struct RobotImageMap {
  int grid = 16;        // image is grid x grid pixels
  int blur_radius = 1;  // (2r+1)^2 box kernel; 0 disables
  double arena_lo = -2.5;
  double arena_hi = 2.5;

  int cells_per_axis() const { return grid - 1; }
  int label_count() const { return cells_per_axis() * cells_per_axis(); }
  // Quantized blob anchor cell of a position.
  std::pair<int, int> cell_of(double a, double b) const;
  int label_of(double a, double b) const;
  Eigen::Vector2d cell_center(int label) const;

  Vec render(const Eigen::Vector2d& position, double theta) const;
  Eigen::Index output_dim() const { return static_cast<Eigen::Index>(grid) * grid; }
};

Vec render_robot_image(const Eigen::Vector2d& position, double theta,
                       const RobotImageMap& map);

// --- Covers ---------------------------------------------------------------

enum class CoverMode { kPlain, kPartialOrder };

struct CoverReport {
  double rho = 0.0;
  CoverMode mode = CoverMode::kPlain;
  bool ok = false;
  std::vector<Vec> witness_failures;  // probe points with no admissible sample(s)
};

// plain: every probe has a sample within sup-norm rho. partial_order: every
// probe is sandwiched w <= x <= z (componentwise) with ||w - z||_inf <= rho.
CoverReport check_rho_cover(const std::vector<Vec>& samples,
                            const std::vector<Vec>& probes, double rho,
                            CoverMode mode);

// Empirical modulus of continuity: max ||values_i - values_j||_inf over pairs
// with ||points_i - points_j||_inf <= rho.
double estimate_modulus(const std::vector<Vec>& points, const std::vector<Vec>& values,
                        double rho);

// --- Lifting (high-dimensional perception) ---------------------------------

Vec lift(const Vec& x, Eigen::Index target_dim);
Vec project_head(const Vec& y, Eigen::Index n);

}  // namespace gradflow
