#include "gradflow/perception.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gradflow/errors.hpp"
#include "gradflow/rng.hpp"

namespace gradflow {

namespace {

using nlohmann::json;

double apply_activation(Activation a, double z) {
  return a == Activation::kTanh ? std::tanh(z) : std::max(0.0, z);
}

double activation_derivative(Activation a, double z) {
  if (a == Activation::kTanh) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
  }
  return z > 0.0 ? 1.0 : 0.0;
}

DenseLayer init_layer(Eigen::Index in, Eigen::Index out, Rng& rng) {
  // Scaled-uniform (Glorot-style) initialization. Biases are drawn too so
  // that activation break points start spread across the input range (zero
  // biases leave relu units affine over single-signed inputs).
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  DenseLayer layer;
  layer.W.resize(out, in);
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) layer.W(r, c) = rng.uniform(-bound, bound);
  }
  layer.b.resize(out);
  for (Eigen::Index r = 0; r < out; ++r) layer.b(r) = rng.uniform(-bound, bound);
  return layer;
}

json layer_to_json(const DenseLayer& layer) {
  std::vector<double> w(static_cast<std::size_t>(layer.W.size()));
  for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
      w[static_cast<std::size_t>(r * layer.W.cols() + c)] = layer.W(r, c);
    }
  }
  return json{{"rows", layer.W.rows()},
              {"cols", layer.W.cols()},
              {"weights", w},
              {"bias", std::vector<double>(layer.b.data(), layer.b.data() + layer.b.size())}};
}

DenseLayer layer_from_json(const json& j) {
  DenseLayer layer;
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto w = j.at("weights").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
      static_cast<Eigen::Index>(b.size()) != rows) {
    throw ConfigError("weight file: layer shape does not match payload");
  }
  layer.W.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      layer.W(r, c) = w[static_cast<std::size_t>(r * cols + c)];
    }
  }
  layer.b = Eigen::Map<const Vec>(b.data(), rows);
  return layer;
}

}  // namespace

std::string to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + name + "' (expected tanh or relu)");
}

Mlp::Mlp(std::vector<Eigen::Index> widths, Activation activation, std::uint64_t seed)
    : widths_(std::move(widths)), activation_(activation), seed_(seed) {
  if (widths_.size() < 2) throw ConfigError("Mlp needs at least input and output widths");
  for (const Eigen::Index w : widths_) {
    if (w < 1) throw ConfigError("Mlp widths must be positive");
  }
  Rng rng(seed);
  layers_.reserve(widths_.size() - 1);
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    layers_.push_back(init_layer(widths_[i], widths_[i + 1], rng));
  }
}

Vec Mlp::normalized(const Vec& x) const {
  if (input_center_.size() == 0) return x;
  return (x - input_center_).cwiseQuotient(input_scale_);
}

void Mlp::set_input_normalization(Vec center, Vec scale) {
  if (center.size() != widths_.front() || scale.size() != widths_.front()) {
    throw ConfigError("input normalization dimension mismatch");
  }
  for (Eigen::Index i = 0; i < scale.size(); ++i) {
    if (!(scale(i) > 0.0)) throw ConfigError("input normalization scale must be positive");
  }
  input_center_ = std::move(center);
  input_scale_ = std::move(scale);
}

Vec Mlp::forward(const Vec& x) const {
  Vec a = normalized(x);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Vec z = layers_[l].W * a + layers_[l].b;
    if (l + 1 < layers_.size()) {
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = apply_activation(activation_, z(i));
    }
    a = std::move(z);
  }
  return a;
}

std::vector<TensorRef> Mlp::parameters() {
  std::vector<TensorRef> refs;
  refs.reserve(2 * layers_.size());
  for (DenseLayer& layer : layers_) {
    refs.push_back({layer.W.data(), layer.W.size()});
    refs.push_back({layer.b.data(), layer.b.size()});
  }
  return refs;
}

void Mlp::backward(const Vec& x, const Vec& dLdy, std::vector<Vec>& grads) const {
  const std::size_t n_layers = layers_.size();
  std::vector<Vec> activations(n_layers + 1);
  std::vector<Vec> pre(n_layers);
  activations[0] = normalized(x);
  for (std::size_t l = 0; l < n_layers; ++l) {
    pre[l] = layers_[l].W * activations[l] + layers_[l].b;
    if (l + 1 < n_layers) {
      Vec a(pre[l].size());
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = apply_activation(activation_, pre[l](i));
      activations[l + 1] = std::move(a);
    } else {
      activations[l + 1] = pre[l];
    }
  }

  Vec delta = dLdy;
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l + 1 < n_layers) {
      for (Eigen::Index i = 0; i < delta.size(); ++i) {
        delta(i) *= activation_derivative(activation_, pre[l](i));
      }
    }
    Eigen::Map<Mat> gW(grads[2 * l].data(), layers_[l].W.rows(), layers_[l].W.cols());
    gW.noalias() += delta * activations[l].transpose();
    Eigen::Map<Vec>(grads[2 * l + 1].data(), delta.size()) += delta;
    if (l > 0) delta = layers_[l].W.transpose() * delta;
  }
}

Vec Mlp::input_gradient(const Vec& x, const Vec& dLdy) const {
  const std::size_t n_layers = layers_.size();
  std::vector<Vec> pre(n_layers);
  Vec a = normalized(x);
  for (std::size_t l = 0; l < n_layers; ++l) {
    pre[l] = layers_[l].W * a + layers_[l].b;
    if (l + 1 < n_layers) {
      a.resize(pre[l].size());
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = apply_activation(activation_, pre[l](i));
    }
  }
  Vec delta = dLdy;
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l + 1 < n_layers) {
      for (Eigen::Index i = 0; i < delta.size(); ++i) {
        delta(i) *= activation_derivative(activation_, pre[l](i));
      }
    }
    delta = layers_[l].W.transpose() * delta;
  }
  if (input_center_.size() != 0) delta = delta.cwiseQuotient(input_scale_);
  return delta;
}

json Mlp::to_json() const {
  json j;
  j["kind"] = "mlp";
  j["activation"] = to_string(activation_);
  j["widths"] = widths_;
  j["seed"] = seed_;
  j["layers"] = json::array();
  for (const DenseLayer& layer : layers_) j["layers"].push_back(layer_to_json(layer));
  if (input_center_.size() != 0) {
    j["input_center"] = std::vector<double>(input_center_.data(),
                                            input_center_.data() + input_center_.size());
    j["input_scale"] = std::vector<double>(input_scale_.data(),
                                           input_scale_.data() + input_scale_.size());
  }
  return j;
}

Mlp Mlp::from_json(const json& j) {
  Mlp net(j.at("widths").get<std::vector<Eigen::Index>>(),
          activation_from_string(j.at("activation").get<std::string>()),
          j.value("seed", std::uint64_t{0}));
  const json& layers = j.at("layers");
  if (layers.size() != net.layers_.size()) {
    throw ConfigError("weight file: layer count does not match widths");
  }
  for (std::size_t i = 0; i < net.layers_.size(); ++i) {
    DenseLayer layer = layer_from_json(layers[i]);
    if (layer.W.rows() != net.widths_[i + 1] || layer.W.cols() != net.widths_[i]) {
      throw ConfigError("weight file: layer shape does not match the declared widths");
    }
    if (!layer.W.allFinite() || !layer.b.allFinite()) {
      throw ConfigError("weight file: non-finite weights");
    }
    net.layers_[i] = std::move(layer);
  }
  if (j.contains("input_center")) {
    const auto c = j.at("input_center").get<std::vector<double>>();
    const auto s = j.at("input_scale").get<std::vector<double>>();
    net.set_input_normalization(Eigen::Map<const Vec>(c.data(), c.size()),
                                Eigen::Map<const Vec>(s.data(), s.size()));
  }
  return net;
}

ResidualNet::ResidualNet(Eigen::Index width, int blocks, Eigen::Index block_hidden,
                         Activation activation, std::uint64_t seed)
    : width_(width), activation_(activation), seed_(seed) {
  if (width < 1) throw ConfigError("ResidualNet width must be positive");
  if (blocks < 1) throw ConfigError("ResidualNet needs at least one block");
  Rng rng(seed);
  blocks_.reserve(static_cast<std::size_t>(blocks));
  for (int i = 0; i < blocks; ++i) {
    blocks_.emplace_back(std::vector<Eigen::Index>{width, block_hidden, width}, activation,
                         rng.below(std::numeric_limits<std::uint64_t>::max()));
  }
  readout_ = init_layer(width, width, rng);
}

Vec ResidualNet::forward(const Vec& x) const {
  Vec y = x;
  for (const Mlp& block : blocks_) y = y + block.forward(y);
  return readout_.W * y + readout_.b;
}

std::vector<TensorRef> ResidualNet::parameters() {
  std::vector<TensorRef> refs;
  for (Mlp& block : blocks_) {
    const std::vector<TensorRef> inner = block.parameters();
    refs.insert(refs.end(), inner.begin(), inner.end());
  }
  refs.push_back({readout_.W.data(), readout_.W.size()});
  refs.push_back({readout_.b.data(), readout_.b.size()});
  return refs;
}

void ResidualNet::backward(const Vec& x, const Vec& dLdy, std::vector<Vec>& grads) const {
  std::vector<Vec> stage(blocks_.size() + 1);
  stage[0] = x;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    stage[i + 1] = stage[i] + blocks_[i].forward(stage[i]);
  }

  // Read-out gradients live at the tail of the flattened layout.
  const std::size_t per_block = 2 * (blocks_.empty() ? 0 : blocks_[0].layers().size());
  const std::size_t readout_at = blocks_.size() * per_block;
  Eigen::Map<Mat> gW(grads[readout_at].data(), readout_.W.rows(), readout_.W.cols());
  gW.noalias() += dLdy * stage.back().transpose();
  Eigen::Map<Vec>(grads[readout_at + 1].data(), dLdy.size()) += dLdy;

  Vec delta = readout_.W.transpose() * dLdy;
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    std::vector<Vec> block_grads(per_block);
    for (std::size_t g = 0; g < per_block; ++g) {
      block_grads[g] = Vec::Zero(grads[i * per_block + g].size());
    }
    blocks_[i].backward(stage[i], delta, block_grads);
    for (std::size_t g = 0; g < per_block; ++g) grads[i * per_block + g] += block_grads[g];
    delta = delta + blocks_[i].input_gradient(stage[i], delta);
  }
}

double ResidualNet::readout_inf_norm() const {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < readout_.W.rows(); ++r) {
    worst = std::max(worst, readout_.W.row(r).cwiseAbs().sum());
  }
  return worst;
}

json ResidualNet::to_json() const {
  json j;
  j["kind"] = "residual";
  j["activation"] = to_string(activation_);
  j["width"] = width_;
  j["seed"] = seed_;
  j["blocks"] = json::array();
  for (const Mlp& block : blocks_) j["blocks"].push_back(block.to_json());
  j["readout"] = layer_to_json(readout_);
  j["readout_inf_norm"] = readout_inf_norm();
  return j;
}

ResidualNet ResidualNet::from_json(const json& j) {
  const json& blocks = j.at("blocks");
  if (blocks.empty()) throw ConfigError("weight file: residual net without blocks");
  const auto first_widths = blocks[0].at("widths").get<std::vector<Eigen::Index>>();
  ResidualNet net(j.at("width").get<Eigen::Index>(), static_cast<int>(blocks.size()),
                  first_widths.size() > 2 ? first_widths[1] : 1,
                  activation_from_string(j.at("activation").get<std::string>()),
                  j.value("seed", std::uint64_t{0}));
  for (std::size_t i = 0; i < net.blocks_.size(); ++i) {
    net.blocks_[i] = Mlp::from_json(blocks[i]);
  }
  net.readout_ = layer_from_json(j.at("readout"));
  return net;
}

std::unique_ptr<Net> net_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "mlp") return std::make_unique<Mlp>(Mlp::from_json(j));
  if (kind == "residual") return std::make_unique<ResidualNet>(ResidualNet::from_json(j));
  throw ConfigError("weight file: unknown network kind '" + kind + "'");
}

void save_net(const Net& net, const std::string& path, const json& metadata) {
  json j = net.to_json();
  j["format_version"] = 1;
  j["metadata"] = metadata;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open weight file for writing: " + path);
  out << j.dump(2) << "\n";
}

std::unique_ptr<Net> load_net(const std::string& path, json* metadata) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open weight file: " + path);
  json j;
  in >> j;
  if (j.value("format_version", 0) != 1) {
    throw ConfigError("weight file " + path + ": unsupported format version");
  }
  if (metadata) *metadata = j.value("metadata", json::object());
  return net_from_json(j);
}

void TrainingSet::validate() const {
  if (inputs.empty()) throw ConfigError("training set is empty");
  if (inputs.size() != targets.size()) {
    throw ConfigError("training set: input/target count mismatch");
  }
  for (const Vec& t : targets) {
    if (!t.allFinite()) throw ConfigError("training set: non-finite target");
  }
}

void save_training_set_csv(const TrainingSet& data, const std::string& path,
                           const std::string& extra_comment) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open training-set file for writing: " + path);
  out << "# region=" << data.region << " seed=" << data.seed;
  if (!extra_comment.empty()) out << " " << extra_comment;
  out << "\n";
  const Eigen::Index ni = data.inputs.front().size();
  const Eigen::Index nt = data.targets.front().size();
  for (Eigen::Index i = 0; i < ni; ++i) out << "in" << i << ",";
  for (Eigen::Index i = 0; i < nt; ++i) out << "out" << i << (i + 1 < nt ? "," : "");
  out << "\n";
  out.precision(17);
  for (std::size_t s = 0; s < data.inputs.size(); ++s) {
    for (Eigen::Index i = 0; i < ni; ++i) out << data.inputs[s](i) << ",";
    for (Eigen::Index i = 0; i < nt; ++i) {
      out << data.targets[s](i) << (i + 1 < nt ? "," : "");
    }
    out << "\n";
  }
}

TrainReport train(Net& net, const TrainingSet& data, const TrainOptions& options) {
  data.validate();
  if (options.epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (options.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (!(options.learning_rate > 0.0)) throw ConfigError("train: learning rate must be > 0");
  if (data.inputs.front().size() != net.input_dim() ||
      data.targets.front().size() != net.output_dim()) {
    throw ConfigError("train: data dimensions do not match the network");
  }

  TrainReport report;
  const auto full_loss = [&]() {
    double acc = 0.0;
    for (std::size_t i = 0; i < data.inputs.size(); ++i) {
      acc += (net.forward(data.inputs[i]) - data.targets[i]).squaredNorm();
    }
    return acc / static_cast<double>(data.inputs.size());
  };

  if (options.epochs == 0) {
    report.final_loss = full_loss();
    return report;
  }

  std::vector<TensorRef> params = net.parameters();
  std::vector<Vec> grads, m, v;
  for (const TensorRef& p : params) {
    grads.push_back(Vec::Zero(p.size));
    m.push_back(Vec::Zero(p.size));
    v.push_back(Vec::Zero(p.size));
  }

  Rng rng(options.seed);
  std::vector<std::size_t> order(data.inputs.size());
  std::iota(order.begin(), order.end(), 0);

  long adam_step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      for (Vec& g : grads) g.setZero();
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        const Vec dLdy =
            2.0 * inv_batch * (net.forward(data.inputs[i]) - data.targets[i]);
        net.backward(data.inputs[i], dLdy, grads);
      }
      ++adam_step;
      const double bias1 = 1.0 - std::pow(options.beta1, static_cast<double>(adam_step));
      const double bias2 = 1.0 - std::pow(options.beta2, static_cast<double>(adam_step));
      for (std::size_t p = 0; p < params.size(); ++p) {
        m[p] = options.beta1 * m[p] + (1.0 - options.beta1) * grads[p];
        v[p] = options.beta2 * v[p] + (1.0 - options.beta2) * grads[p].cwiseProduct(grads[p]);
        Eigen::Map<Vec> theta(params[p].data, params[p].size);
        theta.array() -= options.learning_rate * (m[p].array() / bias1) /
                         ((v[p].array() / bias2).sqrt() + options.adam_epsilon);
      }
    }
    const double loss = full_loss();
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "training diverged at epoch " << epoch << " (non-finite loss)";
      throw NumericError(os.str());
    }
    report.loss_curve.push_back(loss);
  }
  report.final_loss = report.loss_curve.back();
  return report;
}

double sup_training_error(const Net& net, const TrainingSet& data) {
  data.validate();
  double worst = 0.0;
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    worst = std::max(
        worst, (net.forward(data.inputs[i]) - data.targets[i]).cwiseAbs().maxCoeff());
  }
  return worst;
}

Vec GaussianBasisMap::operator()(const Vec& x) const {
  if (means.empty()) throw ConfigError("gaussian basis map has no means");
  Vec xi(output_dim());
  for (std::size_t j = 0; j < means.size(); ++j) {
    if (means[j].size() != x.size() || variance.size() != x.size()) {
      throw ConfigError("gaussian basis map: dimension mismatch");
    }
    double expo = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double d = x(i) - means[j](i);
      expo += d * d / (2.0 * variance(i));
    }
    xi(static_cast<Eigen::Index>(j)) = std::exp(-expo);
  }
  return xi;
}

std::pair<int, int> RobotImageMap::cell_of(double a, double b) const {
  const auto quantize = [this](double p) {
    if (!(p >= arena_lo && p <= arena_hi)) {
      std::ostringstream os;
      os << "position " << p << " outside the arena [" << arena_lo << ", " << arena_hi << "]";
      throw ConfigError(os.str());
    }
    const double tau = (p - arena_lo) / (arena_hi - arena_lo);
    return std::min(cells_per_axis() - 1,
                    static_cast<int>(std::floor(tau * cells_per_axis())));
  };
  return {quantize(a), quantize(b)};
}

int RobotImageMap::label_of(double a, double b) const {
  const auto [i, j] = cell_of(a, b);
  return i * cells_per_axis() + j;
}

Eigen::Vector2d RobotImageMap::cell_center(int label) const {
  if (label < 0 || label >= label_count()) throw ConfigError("cell label out of range");
  const int i = label / cells_per_axis();
  const int j = label % cells_per_axis();
  const double step = (arena_hi - arena_lo) / cells_per_axis();
  return {arena_lo + (i + 0.5) * step, arena_lo + (j + 0.5) * step};
}

Vec RobotImageMap::render(const Eigen::Vector2d& position, double) const {
  if (grid < 4) throw ConfigError("robot image grid must be at least 4");
  const auto [ci, cj] = cell_of(position(0), position(1));
  Mat image = Mat::Zero(grid, grid);
  image(ci, cj) = 1.0;
  image(ci + 1, cj) = 1.0;
  image(ci, cj + 1) = 1.0;
  image(ci + 1, cj + 1) = 1.0;

  if (blur_radius > 0) {
    // Scatter form of the box blur: each pixel spreads its mass uniformly over
    // the kernel window; out-of-bounds targets clamp to the border so the
    // total intensity is conserved exactly.
    const int r = blur_radius;
    const double share = 1.0 / ((2.0 * r + 1.0) * (2.0 * r + 1.0));
    Mat blurred = Mat::Zero(grid, grid);
    for (int i = 0; i < grid; ++i) {
      for (int j = 0; j < grid; ++j) {
        if (image(i, j) == 0.0) continue;
        for (int di = -r; di <= r; ++di) {
          for (int dj = -r; dj <= r; ++dj) {
            const int ti = std::clamp(i + di, 0, grid - 1);
            const int tj = std::clamp(j + dj, 0, grid - 1);
            blurred(ti, tj) += share * image(i, j);
          }
        }
      }
    }
    image = std::move(blurred);
  }

  Vec flat(output_dim());
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) flat(static_cast<Eigen::Index>(i) * grid + j) = image(i, j);
  }
  return flat;
}

Vec render_robot_image(const Eigen::Vector2d& position, double theta,
                       const RobotImageMap& map) {
  return map.render(position, theta);
}

CoverReport check_rho_cover(const std::vector<Vec>& samples,
                            const std::vector<Vec>& probes, double rho,
                            CoverMode mode) {
  CoverReport report;
  report.rho = rho;
  report.mode = mode;
  if (rho < 0.0) throw ConfigError("cover radius must be nonnegative");

  for (const Vec& x : probes) {
    bool covered = false;
    if (samples.empty()) {
      // no samples: nothing can cover; fall through to failure
    } else if (mode == CoverMode::kPlain) {
      for (const Vec& z : samples) {
        if ((x - z).cwiseAbs().maxCoeff() <= rho) {
          covered = true;
          break;
        }
      }
    } else {
      for (std::size_t a = 0; a < samples.size() && !covered; ++a) {
        if ((samples[a].array() > x.array()).any()) continue;  // need w <= x
        for (std::size_t b = 0; b < samples.size(); ++b) {
          if ((samples[b].array() < x.array()).any()) continue;  // need x <= z
          if ((samples[a] - samples[b]).cwiseAbs().maxCoeff() <= rho) {
            covered = true;
            break;
          }
        }
      }
    }
    if (!covered) report.witness_failures.push_back(x);
  }
  report.ok = report.witness_failures.empty() && !probes.empty();
  if (probes.empty()) report.ok = true;  // vacuous
  return report;
}

double estimate_modulus(const std::vector<Vec>& points, const std::vector<Vec>& values,
                        double rho) {
  if (points.size() != values.size()) {
    throw ConfigError("estimate_modulus: point/value count mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if ((points[i] - points[j]).cwiseAbs().maxCoeff() <= rho) {
        worst = std::max(worst, (values[i] - values[j]).cwiseAbs().maxCoeff());
      }
    }
  }
  return worst;
}

Vec lift(const Vec& x, Eigen::Index target_dim) {
  if (x.size() > target_dim) {
    throw ConfigError("lift: target dimension smaller than the input");
  }
  Vec y = Vec::Zero(target_dim);
  y.head(x.size()) = x;
  return y;
}

Vec project_head(const Vec& y, Eigen::Index n) {
  if (n > y.size()) throw ConfigError("project_head: requested more entries than available");
  return y.head(n);
}

}  // namespace gradflow
