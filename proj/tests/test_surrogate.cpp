#include "gradflow/surrogate_gradient.hpp"

#include <cmath>
#include <doctest.h>

#include "gradflow/errors.hpp"
#include "gradflow/rng.hpp"

using namespace gradflow;

namespace {

Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (const double x : values) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("centered difference is exact on quadratics") {
  const SurrogateGradient grad([](const Vec& u) { return u(0) * u(0); }, 0.1, 1);
  CHECK(grad(make_vec({1.0}))(0) == doctest::Approx(2.0).epsilon(1e-12));

  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const Vec a = rng.gaussian_vector(3);
    const Mat Q = a * a.transpose() + Mat::Identity(3, 3);
    const Vec b = rng.gaussian_vector(3);
    const double eps = rng.uniform(0.01, 0.5);
    const SurrogateGradient g(
        [Q, b](const Vec& u) { return 0.5 * u.dot(Q * u) + b.dot(u); }, eps, 3);
    const Vec point = rng.gaussian_vector(3);
    CHECK((g(point) - (Q * point + b)).norm() < 1e-10);
  }
}

TEST_CASE("cubic truncation error matches the hand value") {
  const SurrogateGradient grad([](const Vec& u) { return std::pow(u(0), 3); }, 0.1, 1);
  CHECK(grad(make_vec({1.0}))(0) == doctest::Approx(3.01).epsilon(1e-12));
}

TEST_CASE("constant surrogate gives the zero vector") {
  const SurrogateGradient grad([](const Vec&) { return 4.5; }, 0.05, 3);
  CHECK(grad(make_vec({1.0, -2.0, 0.5})).norm() == 0.0);
}

TEST_CASE("truncation bound values") {
  CHECK(fd_truncation_bound(0.0, 0.1, 2) == 0.0);
  CHECK(fd_truncation_bound(6.0, 0.1, 1) == doctest::Approx(0.01));
  // The dim-1 bound with M3 = 6 matches the measured cubic error above.
}

TEST_CASE("centered-difference error on exp has slope 2") {
  std::vector<double> log_eps, log_err;
  for (const double eps : {1e-1, 1e-2, 1e-3}) {
    const SurrogateGradient grad([](const Vec& u) { return std::exp(u(0)); }, eps, 1);
    const double err = std::abs(grad(make_vec({1.0}))(0) - std::exp(1.0));
    log_eps.push_back(std::log10(eps));
    log_err.push_back(std::log10(err));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = 3.0;
  for (int i = 0; i < 3; ++i) {
    sx += log_eps[i];
    sy += log_err[i];
    sxx += log_eps[i] * log_eps[i];
    sxy += log_eps[i] * log_err[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(std::abs(slope - 2.0) <= 0.1);
}

TEST_CASE("surrogate amplification stays below dim * sup_err / eps") {
  // Surrogate = truth + bounded wiggle of amplitude e_hat.
  const double e_hat = 1e-3;
  const auto truth = [](const Vec& u) { return u.squaredNorm(); };
  const auto wiggle = [e_hat](const Vec& u) {
    return e_hat * std::sin(997.0 * u(0)) * std::cos(613.0 * u(1));
  };
  Rng rng(3);
  for (const double eps : {1e-3, 1e-2, 1e-1}) {
    const SurrogateGradient hat([&](const Vec& u) { return truth(u) + wiggle(u); }, eps, 2);
    const SurrogateGradient exact(truth, eps, 2);
    for (int i = 0; i < 50; ++i) {
      const Vec u = rng.gaussian_vector(2);
      CHECK((hat(u) - exact(u)).norm() <= 2.0 * e_hat / eps + 1e-12);
    }
  }
}

TEST_CASE("epsilon selection follows the closed-form scaling law") {
  // Zero surrogate error: pure truncation prefers the smallest step.
  CHECK(select_epsilon(0.0, 1.0, 1, 1e-6, 1.0).epsilon == doctest::Approx(1e-6));
  // No curvature bound: the configured default wins.
  CHECK(select_epsilon(0.1, 0.0, 1, 1e-6, 1.0, 1e-2).epsilon == doctest::Approx(1e-2));

  const double e1 = select_epsilon(1e-4, 2.0, 3, 1e-9, 10.0).epsilon;
  const double e2 = select_epsilon(2e-4, 2.0, 3, 1e-9, 10.0).epsilon;
  CHECK(e2 / e1 == doctest::Approx(std::cbrt(2.0)).epsilon(1e-9));

  // Minimizer property: the budget at eps* does not exceed the budget at
  // 2 eps* or eps*/2.
  const EpsilonSelection sel = select_epsilon(1e-4, 2.0, 3, 1e-9, 10.0);
  const auto budget = [&](double eps) {
    return 3.0 * 1e-4 / eps + fd_truncation_bound(2.0, eps, 3);
  };
  CHECK(sel.budget <= budget(2.0 * sel.epsilon) + 1e-15);
  CHECK(sel.budget <= budget(0.5 * sel.epsilon) + 1e-15);
}

TEST_CASE("probe points outside the training region are projected and counted") {
  const ConvexRegion core = ConvexRegion::box(make_vec({0.0}), make_vec({1.0}));
  const SurrogateGradient grad([](const Vec& u) { return u(0); }, 0.1, 1, core);
  // Point well outside C + ball[eps]: probes are pulled back onto C.
  grad(make_vec({5.0}));
  CHECK(grad.out_of_region_count() == 2);
  // Interior point: probes stay inside C + ball[eps].
  grad(make_vec({0.5}));
  CHECK(grad.out_of_region_count() == 2);
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(SurrogateGradient([](const Vec&) { return 0.0; }, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(fd_truncation_bound(-1.0, 0.1, 1), ConfigError);
  CHECK_THROWS_AS(select_epsilon(-0.1, 1.0, 1), ConfigError);
}
