#include "gradflow/numerics.hpp"

#include <cmath>
#include <sstream>

#include "gradflow/errors.hpp"

namespace gradflow {

namespace {

std::string dim_mismatch(const char* what, Eigen::Index got, Eigen::Index want) {
  std::ostringstream os;
  os << what << ": dimension " << got << " does not match region dimension " << want;
  return os.str();
}

Vec project_halfspace(const Vec& normal, double offset, const Vec& point) {
  const double slack = normal.dot(point) - offset;
  if (slack <= 0.0) return point;
  return point - (slack / normal.squaredNorm()) * normal;
}

}  // namespace

ConvexRegion ConvexRegion::box(Vec lower, Vec upper) {
  if (lower.size() != upper.size()) {
    throw ConfigError("box region: lower and upper bounds differ in dimension");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower(i) <= upper(i))) {
      std::ostringstream os;
      os << "box region is empty: lower(" << i << ") = " << lower(i)
         << " > upper(" << i << ") = " << upper(i);
      throw ConfigError(os.str());
    }
  }
  ConvexRegion r;
  r.dim_ = lower.size();
  r.kind_ = BoxRegion{std::move(lower), std::move(upper)};
  return r;
}

ConvexRegion ConvexRegion::ball(Vec center, double radius) {
  if (!(radius > 0.0)) throw ConfigError("ball region requires radius > 0");
  ConvexRegion r;
  r.dim_ = center.size();
  r.kind_ = BallRegion{std::move(center), radius};
  return r;
}

ConvexRegion ConvexRegion::halfspaces(Mat normals, Vec offsets) {
  if (normals.rows() != offsets.size()) {
    throw ConfigError("halfspace region: row count does not match offset count");
  }
  if (normals.rows() == 0) throw ConfigError("halfspace region needs at least one halfspace");
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    if (normals.row(i).norm() < 1e-300) {
      throw ConfigError("halfspace region: zero normal vector");
    }
  }
  ConvexRegion r;
  r.dim_ = normals.cols();
  r.kind_ = HalfspaceRegion{std::move(normals), std::move(offsets)};
  return r;
}

ConvexRegion ConvexRegion::all(Eigen::Index dim) {
  ConvexRegion r;
  r.dim_ = dim;
  r.kind_ = std::monostate{};
  return r;
}

bool ConvexRegion::contains(const Vec& point, double tol) const {
  if (point.size() != dim_) {
    throw ConfigError(dim_mismatch("contains", point.size(), dim_));
  }
  if (unconstrained()) return true;
  return (project(*this, point) - point).norm() <= tol;
}

BoxRegion ConvexRegion::bounding_box() const {
  if (const auto* box = std::get_if<BoxRegion>(&kind_)) return *box;
  if (const auto* ball = std::get_if<BallRegion>(&kind_)) {
    return BoxRegion{ball->center.array() - ball->radius,
                     ball->center.array() + ball->radius};
  }
  throw ConfigError("bounding_box: region has no finite axis-aligned bound");
}

double ConvexRegion::diameter() const {
  const BoxRegion box = bounding_box();
  return (box.upper - box.lower).norm();
}

Vec project(const ConvexRegion& region, const Vec& point) {
  if (point.size() != region.dim_) {
    throw ConfigError(dim_mismatch("project", point.size(), region.dim_));
  }
  if (const auto* box = std::get_if<BoxRegion>(&region.kind_)) {
    return point.cwiseMax(box->lower).cwiseMin(box->upper);
  }
  if (const auto* ball = std::get_if<BallRegion>(&region.kind_)) {
    const Vec d = point - ball->center;
    const double nrm = d.norm();
    // The relative guard keeps re-projections of boundary points exact.
    if (nrm <= ball->radius * (1.0 + 1e-13)) return point;
    return ball->center + (ball->radius / nrm) * d;
  }
  if (const auto* hs = std::get_if<HalfspaceRegion>(&region.kind_)) {
    // Dykstra's alternating projection with per-set correction terms.
    const Eigen::Index m = hs->normals.rows();
    Vec x = point;
    std::vector<Vec> corrections(static_cast<std::size_t>(m), Vec::Zero(point.size()));
    constexpr int kMaxSweeps = 10000;
    constexpr double kTol = 1e-12;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
      double moved = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        Vec& p = corrections[static_cast<std::size_t>(i)];
        const Vec y = project_halfspace(hs->normals.row(i), hs->offsets(i), x + p);
        p = x + p - y;
        moved = std::max(moved, (y - x).norm());
        x = y;
      }
      if (moved <= kTol) break;
    }
    return x;
  }
  return point;  // unconstrained
}

long StepperConfig::step_count() const {
  validate();
  if (t1 == t0) return 0;
  return std::lround((t1 - t0) / dt);
}

void StepperConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("stepper: dt must be > 0");
  if (!(t1 >= t0)) throw ConfigError("stepper: t1 must be >= t0");
  if (record_every < 1) throw ConfigError("stepper: record_every must be >= 1");
  if (t1 > t0) {
    const double steps = (t1 - t0) / dt;
    const double rounded = std::round(steps);
    if (rounded < 1.0 || std::abs(steps - rounded) > 1e-9 * std::max(1.0, rounded)) {
      std::ostringstream os;
      os << "stepper: horizon (" << t0 << ", " << t1 << ") is not an integer number of dt = "
         << dt << " steps";
      throw ConfigError(os.str());
    }
  }
}

Vec rk4_step(const OdeField& field, const Vec& state, double t, double dt) {
  const auto eval = [&](double tau, const Vec& x) -> Vec {
    Vec dx = field(tau, x);
    if (!dx.allFinite()) {
      std::ostringstream os;
      os << "non-finite derivative at t = " << tau;
      throw NumericError(os.str());
    }
    return dx;
  };
  const Vec k1 = eval(t, state);
  const Vec k2 = eval(t + 0.5 * dt, state + (0.5 * dt) * k1);
  const Vec k3 = eval(t + 0.5 * dt, state + (0.5 * dt) * k2);
  const Vec k4 = eval(t + dt, state + dt * k3);
  return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

SamplePath integrate(const OdeField& field, const Vec& x0,
                     const StepperConfig& stepper, const SampleObserver& observer) {
  stepper.validate();
  if (!x0.allFinite()) throw NumericError("integrate: non-finite initial state");

  SamplePath path;
  const long n_steps = stepper.step_count();
  path.times.reserve(static_cast<std::size_t>(n_steps / stepper.record_every + 2));
  path.states.reserve(path.times.capacity());

  Vec x = x0;
  long sample_index = 0;
  const auto record = [&](double t) {
    path.times.push_back(t);
    path.states.push_back(x);
    if (observer) observer(sample_index, t, x);
    ++sample_index;
  };

  record(stepper.t0);
  for (long step = 0; step < n_steps; ++step) {
    const double t = stepper.t0 + static_cast<double>(step) * stepper.dt;
    try {
      x = rk4_step(field, x, t, stepper.dt);
    } catch (const NumericError& err) {
      path.truncated = true;
      path.failure = err.what();
      return path;
    }
    if (!x.allFinite()) {
      path.truncated = true;
      std::ostringstream os;
      os << "non-finite state after step at t = " << t + stepper.dt;
      path.failure = os.str();
      return path;
    }
    const long done = step + 1;
    if (done % stepper.record_every == 0 || done == n_steps) {
      record(stepper.t0 + static_cast<double>(done) * stepper.dt);
    }
  }
  return path;
}

}  // namespace gradflow
