#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace eoslab {

inline constexpr const char* kVersion = "0.1.0";

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Solver gave up before reaching the requested tolerance; carries the best
/// estimate so callers can decide whether it is still usable.
class NoConvergenceError : public std::runtime_error {
 public:
  NoConvergenceError(const std::string& msg, double best, double residual)
      : std::runtime_error(msg), best_estimate(best), residual(residual) {}
  double best_estimate;
  double residual;
};

/// A run produced a non-finite value; `step` is the offending iteration.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(const std::string& msg, long step)
      : std::runtime_error(msg), step(step) {}
  long step;
};

/// Deterministic seeded RNG (splitmix64 core). All randomness in the library
/// goes through this so traces are bit-reproducible for a given seed,
/// independent of the C++ standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1]; safe as a log() argument.
  double next_double_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Standard normal via Box-Muller; generates pairs, caches the spare.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_double_open();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vector gaussian_vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = next_gaussian();
    return v;
  }

  /// Uniform direction on the unit sphere.
  Vector unit_vector(int n) {
    Vector v = gaussian_vector(n);
    double nn = v.norm();
    while (nn == 0.0) {  // astronomically unlikely
      v = gaussian_vector(n);
      nn = v.norm();
    }
    return v / nn;
  }

  /// Index in [0, n).
  std::uint64_t next_index(std::uint64_t n) {
    // Rejection-free enough for our n (bias < 2^-40 for n < 2^24).
    return next_u64() % n;
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace eoslab
