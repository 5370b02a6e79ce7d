#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lcmae {

// Error taxonomy. Callers that care about the failure class catch the
// subtype; everything derives from Error for blanket handling.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};

// SplitMix64. The exact constants are part of the on-disk contracts
// (mask plans, scene seeds), so they live here and nowhere else.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) using the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // j in [0, n)
  uint64_t below(uint64_t n) { return next() % n; }

  // Box-Muller; both uniforms come from this stream so the draw order is
  // fixed by construction.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Normal(0, std) restricted to +-2 std by resampling.
  double truncated_normal(double std_dev) {
    for (;;) {
      double z = normal();
      if (std::fabs(z) <= 2.0) return z * std_dev;
    }
  }

 private:
  uint64_t state_;
};

// SplitMix64 output finalizer as a standalone mixer.
inline uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Order-sensitive combiner: mask seeds are derive(seed, epoch, index),
// scene seeds derive(seed, split_tag, index).
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b) {
  return mix64(mix64(mix64(seed) ^ a) ^ b);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace lcmae
