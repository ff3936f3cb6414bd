#include "gradflow/plants.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gradflow/errors.hpp"

namespace gradflow {

namespace {

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

}  // namespace

std::vector<Eigen::Index> PlantSpec::tracked() const {
  if (!tracked_indices.empty()) return tracked_indices;
  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  return all;
}

Vec PlantSpec::select_tracked(const Vec& x) const {
  if (tracked_indices.empty()) return x;
  Vec out(static_cast<Eigen::Index>(tracked_indices.size()));
  for (std::size_t i = 0; i < tracked_indices.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = x(tracked_indices[i]);
  }
  return out;
}

PlantSpec lti_plant(const Mat& A, const Mat& B, const Mat& E) {
  if (A.rows() != A.cols()) throw ConfigError("lti_plant: A must be square");
  if (B.rows() != A.rows()) throw ConfigError("lti_plant: B row count must match A");
  if (E.rows() != A.rows()) throw ConfigError("lti_plant: E row count must match A");

  const Eigen::EigenSolver<Mat> eig(A);
  double max_real = -std::numeric_limits<double>::infinity();
  std::complex<double> worst;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const std::complex<double> lambda = eig.eigenvalues()(i);
    if (lambda.real() > max_real) {
      max_real = lambda.real();
      worst = lambda;
    }
  }
  if (!(max_real < 0.0)) {
    std::ostringstream os;
    os << "lti_plant: A is not Hurwitz, eigenvalue " << worst.real();
    if (worst.imag() != 0.0) os << (worst.imag() > 0 ? "+" : "") << worst.imag() << "i";
    os << " has nonnegative real part";
    throw ConfigError(os.str());
  }

  const Mat Ainv = A.fullPivLu().inverse();
  const Mat Hu = -Ainv * B;  // constant input Jacobian
  const Mat Hw = -Ainv * E;

  PlantSpec plant;
  plant.name = "lti";
  plant.n = A.rows();
  plant.n_u = B.cols();
  plant.n_w = E.cols();
  plant.field = [A, B, E](const Vec& x, const Vec& u, const Vec& w) -> Vec {
    return A * x + B * u + E * w;
  };
  plant.h_u = [Hu](const Vec& u) -> Vec { return Hu * u; };
  plant.h_w = [Hw](const Vec& w) -> Vec { return Hw * w; };
  plant.input_jacobian = [Hu](const Vec&) -> Mat { return Hu; };
  plant.lipschitz.l_hu = spectral_norm(Hu);
  plant.lipschitz.l_hw = spectral_norm(Hw);
  plant.lipschitz.L_x = spectral_norm(A);
  plant.lipschitz.L_u = spectral_norm(B);
  plant.lipschitz.L_w = spectral_norm(E);
  plant.stability.decay_rate = -max_real;
  // Overshoot from the eigenbasis conditioning; exact for normal A.
  const Eigen::JacobiSVD<Mat> svd(eig.eigenvectors().real().eval(),
                                  Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double cond = svd.singularValues()(0) /
                      std::max(svd.singularValues()(svd.singularValues().size() - 1), 1e-300);
  plant.stability.overshoot = std::max(1.0, cond);
  return plant;
}

PlantSpec sis_plant(const SisParameters& p) {
  if (!(p.beta > 0.0) || !(p.gamma > 0.0) || !(p.mu > 0.0)) {
    throw ConfigError("sis_plant: beta, gamma, mu must all be > 0");
  }
  const double c = p.ratio();  // (mu + gamma) / beta

  PlantSpec plant;
  plant.name = "sis";
  plant.n = 1;
  plant.n_u = 1;
  plant.n_w = 1;  // no physical disturbance channel; h_w is identically zero
  const double beta = p.beta;
  const double gm = p.gamma + p.mu;
  plant.field = [beta, gm](const Vec& x, const Vec& u, const Vec&) -> Vec {
    Vec dx(1);
    dx(0) = (beta / u(0)) * (1.0 - x(0)) * x(0) - gm * x(0);
    return dx;
  };
  plant.h_u = [c](const Vec& u) -> Vec {
    Vec x(1);
    x(0) = 1.0 - c * u(0);
    return x;
  };
  plant.h_w = [](const Vec&) -> Vec { return Vec::Zero(1); };
  plant.input_jacobian = [c](const Vec&) -> Mat {
    Mat H(1, 1);
    H(0, 0) = -c;
    return H;
  };
  plant.lipschitz.l_hu = c;
  plant.lipschitz.l_hw = 0.0;
  // Linearization at the endemic equilibrium gives rate beta/u - (gamma+mu);
  // worst case over the admissible input box.
  plant.lipschitz.L_x = beta;  // |d f / d x| <= beta |1 - 2x| / u <= beta on the unit box
  plant.lipschitz.L_u = beta / 4.0;
  plant.lipschitz.L_w = 0.0;
  plant.stability.decay_rate = beta / p.input_upper() - gm;
  plant.stability.overshoot = 1.0;
  return plant;
}

Eigen::Vector2d sis_full_field(double s, double x, double u, const SisParameters& p) {
  if (!(s >= 0.0 && s <= 1.0) || !(x >= 0.0 && x <= 1.0)) {
    throw ConfigError("sis_full_field: s and x must lie in [0, 1]");
  }
  if (!(u > 0.0 && u <= 1.0)) throw ConfigError("sis_full_field: u must lie in (0, 1]");
  Eigen::Vector2d d;
  d(0) = p.mu - p.mu * s - u * p.beta * s * x + p.gamma * x;
  d(1) = u * p.beta * s * x - (p.gamma + p.mu) * x;
  return d;
}

Eigen::Vector3d unicycle_field(const Eigen::Vector3d& state, double v, double omega) {
  return {v * std::cos(state(2)), v * std::sin(state(2)), omega};
}

double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

PolarState polar_transform(const Eigen::Vector3d& state, const Eigen::Vector2d& reference) {
  const double da = reference(0) - state(0);
  const double db = reference(1) - state(1);
  const double range = std::hypot(da, db);
  if (range < 1e-12) {
    throw NumericError("polar_transform: reference coincides with the robot position");
  }
  return {range, wrap_angle(std::atan2(db, da) - state(2))};
}

PlantSpec stabilized_unicycle(double k) {
  if (!(k > 0.0)) throw ConfigError("stabilized_unicycle: gain k must be > 0");

  PlantSpec plant;
  plant.name = "unicycle";
  plant.n = 3;
  plant.n_u = 2;
  plant.n_w = 1;
  plant.field = [k](const Vec& x, const Vec& u, const Vec&) -> Vec {
    const Eigen::Vector3d state = x.head<3>();
    const double da = u(0) - state(0);
    const double db = u(1) - state(1);
    const double range = std::hypot(da, db);
    if (range < 1e-9) return Vec::Zero(3);  // at the reference; equilibrium
    const double phi = wrap_angle(std::atan2(db, da) - state(2));
    const double v = k * range * std::cos(phi);
    const double omega = k * (std::cos(phi) + 1.0) * std::sin(phi) + k * phi;
    Vec dx(3);
    dx << v * std::cos(state(2)), v * std::sin(state(2)), omega;
    return dx;
  };
  // The equilibrium orientation is free; it is reported as 0 and excluded
  // from the tracking error via tracked_indices.
  plant.h_u = [](const Vec& u) -> Vec {
    Vec x(3);
    x << u(0), u(1), 0.0;
    return x;
  };
  plant.h_w = [](const Vec&) -> Vec { return Vec::Zero(3); };
  plant.input_jacobian = [](const Vec&) -> Mat {
    Mat H = Mat::Zero(3, 2);
    H(0, 0) = 1.0;
    H(1, 1) = 1.0;
    return H;
  };
  plant.tracked_indices = {0, 1};
  plant.lipschitz.l_hu = 1.0;
  plant.lipschitz.l_hw = 0.0;
  plant.lipschitz.L_x = 3.0 * k;
  plant.lipschitz.L_u = 3.0 * k;
  plant.lipschitz.L_w = 0.0;
  plant.stability.decay_rate = k;
  plant.stability.overshoot = 1.0;
  return plant;
}

DisturbanceSignal DisturbanceSignal::constant(Vec value) {
  DisturbanceSignal s;
  s.dim_ = value.size();
  s.ess_sup_ = 0.0;
  s.kind_ = ConstantSignal{std::move(value)};
  return s;
}

DisturbanceSignal DisturbanceSignal::sinusoid(Vec mean, Vec amplitude,
                                              double angular_frequency) {
  if (mean.size() != amplitude.size()) {
    throw ConfigError("sinusoid disturbance: mean/amplitude dimension mismatch");
  }
  DisturbanceSignal s;
  s.dim_ = mean.size();
  s.ess_sup_ = amplitude.norm() * std::abs(angular_frequency);
  s.kind_ = SinusoidSignal{std::move(mean), std::move(amplitude), angular_frequency};
  return s;
}

DisturbanceSignal DisturbanceSignal::piecewise_constant(std::vector<double> breakpoints,
                                                        std::vector<Vec> values,
                                                        double ramp) {
  if (values.size() != breakpoints.size() + 1) {
    throw ConfigError("piecewise disturbance: need one more value than breakpoints");
  }
  if (!(ramp > 0.0)) throw ConfigError("piecewise disturbance: ramp must be > 0");
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i] > breakpoints[i - 1])) {
      throw ConfigError("piecewise disturbance: breakpoints must be ascending");
    }
  }
  DisturbanceSignal s;
  s.dim_ = values.front().size();
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    worst = std::max(worst, (values[i + 1] - values[i]).norm() / ramp);
  }
  s.ess_sup_ = worst;
  s.kind_ = PiecewiseConstantSignal{std::move(breakpoints), std::move(values), ramp};
  return s;
}

Vec DisturbanceSignal::operator()(double t) const {
  if (const auto* c = std::get_if<ConstantSignal>(&kind_)) return c->value;
  if (const auto* s = std::get_if<SinusoidSignal>(&kind_)) {
    return s->mean + std::sin(s->angular_frequency * t) * s->amplitude;
  }
  const auto& pw = std::get<PiecewiseConstantSignal>(kind_);
  Vec value = pw.values.front();
  for (std::size_t i = 0; i < pw.breakpoints.size(); ++i) {
    const double start = pw.breakpoints[i];
    if (t <= start) break;
    const double blend = std::min(1.0, (t - start) / pw.ramp);
    value = (1.0 - blend) * value + blend * pw.values[i + 1];
  }
  return value;
}

}  // namespace gradflow
