#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dnfomp {

inline constexpr double kPi = 3.14159265358979323846;

/// Scene file or argument rejected before planning starts (CLI exit 2).
struct InvalidInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Seeding failed: the A* frontier exhausted or an endpoint is blocked (CLI exit 3).
struct NoPathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The trajectory loss became NaN/Inf during optimization (CLI exit 4).
struct NonFiniteLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Wrap an angle to [-pi, pi].
inline double wrap_pi(double a) { return std::remainder(a, 2.0 * kPi); }

/// Shortest signed arc from angle `a` to angle `b`.
inline double shortest_arc(double a, double b) { return wrap_pi(b - a); }

inline double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// BCE with logits, the log1p(exp) form that survives large |logit|.
inline double bce_with_logits_value(double logit, double label) {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

/// Deterministic RNG wrapper. Distributions are hand-rolled from the raw
/// mt19937_64 stream so sampled sequences do not depend on the standard
/// library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Multiply-shift; bias is negligible for the n used here (< 2^32).
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream for a parallel task.
  Rng split(std::uint64_t tag) {
    return Rng(next_u64() ^ (0x9e3779b97f4a7c15ULL * (tag + 1)));
  }

 private:
  std::mt19937_64 eng_;
};

/// Dense row-major matrix of doubles. Shapes are small (<= a few hundred per
/// side); this is the value type moved through the autodiff tape and the
/// storage for network parameters.
struct Tensor {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : data(r * c, 0.0), rows(r), cols(c) {}

  std::size_t size() const { return data.size(); }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool all_finite() const {
    double acc = 0.0;
    for (double v : data) acc += std::abs(v);
    return std::isfinite(acc);
  }
};

}  // namespace dnfomp
