#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gradflow {

// Deterministic random helpers on top of std::mt19937_64. The standard pins
// the engine's output sequence but not the distribution adaptors, so draws
// are produced by hand here and stay reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller standard normal.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd gaussian_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = gaussian();
    return v;
  }

  Eigen::VectorXd uniform_vector(Eigen::Index n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }

  Eigen::VectorXd unit_vector(Eigen::Index n) {
    Eigen::VectorXd v = gaussian_vector(n);
    const double nrm = v.norm();
    if (nrm < 1e-300) {
      v.setZero();
      v(0) = 1.0;
      return v;
    }
    return v / nrm;
  }

  // Bounded integer draw; slight modulo bias is irrelevant for shuffles.
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  // Fisher-Yates, spelled out so the permutation does not depend on the
  // standard library's std::shuffle implementation.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      std::swap(items[i], items[below(i + 1)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gradflow
