#pragma once

#include <cmath>
#include <cstdint>

namespace sdwan {

// splitmix64 finalizer; the basis for both the keyed (counter-based) and the
// sequential RNG below. All draws are reproducible across platforms: no
// libstdc++ distributions are involved anywhere.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a, b) ^ (c + 0x6a09e667f3bcc909ULL));
}

// uniform in [0, 1) from 53 random bits
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// uniform in (0, 1], safe to feed into log()
inline double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

// Counter-based generator: a pure function of (seed, stream, counter).
// Random access, no state, safe to call from any number of threads.
struct CounterRng {
  std::uint64_t seed = 0;

  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return to_unit(mix64(seed, stream, counter));
  }
  // standard normal via Box-Muller; two sub-draws are derived from the key
  double normal(std::uint64_t stream, std::uint64_t counter) const {
    const std::uint64_t k = mix64(seed, stream, counter);
    const double u1 = to_unit_open(k);
    const double u2 = to_unit(mix64(k, 0x5bf0a8b1457eefa1ULL));
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }
};

// Sequential generator (splitmix64 stream) for places where draw order is the
// natural contract: parameter init, exploration noise, replay sampling.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t seed) : state_(mix64(seed)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }
  double uniform() { return to_unit(next_u64()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Box-Muller pair, second value cached
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = to_unit_open(next_u64());
    const double u2 = to_unit(next_u64());
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }
  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // rejection-free modulo is fine at our scales (n << 2^64)
    return next_u64() % n;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace sdwan
