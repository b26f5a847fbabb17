#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace passivity {

/// Numerical tolerances shared across modules. All values are absolute unless
/// noted otherwise.
namespace tol {
inline constexpr double order = 1e-12;     // probability comparisons
inline constexpr double eps = 1e-12;       // energy degeneracy detection
inline constexpr double norm = 1e-12;      // sum of probabilities
inline constexpr double p_floor = 1e-15;   // smallest admissible population for s = -log p
inline constexpr double merge = 1e-10;     // L-infinity distance for point deduplication
inline constexpr double hull_cross = 1e-10;  // relative cross-product threshold
inline constexpr double es = 1e-8;         // (E, S) constraint residual
inline constexpr double dist = 1e-6;       // distance to the equilibrium curve
}  // namespace tol

class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotFullRank : public InputError {
 public:
  using InputError::InputError;
};

class Infeasible : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class CompositionCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CompletelyPassiveError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class StepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// splitmix64-seeded xoshiro256** generator. Bit-exact across platforms,
/// unlike the standard distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    for (auto& w : state_) {
      seed += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = seed;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      w = z ^ (z >> 31);
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  long long integer(long long lo, long long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long long>(next() % span);
  }

  /// Standard exponential variate; Dirichlet(1,...,1) is a normalized vector of these.
  double exponential() { return -std::log1p(-uniform()); }

  double normal() {
    // Box-Muller; the second variate is discarded to keep the stream simple.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4]{};
};

/// FNV-1a over raw bytes.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

inline double entropy_term(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

}  // namespace passivity
