#pragma once

// Deterministic randomness for the whole simulator. One seeded RandomSource
// drives every coin in a protocol run, which is what makes transcripts
// byte-for-byte reproducible. The u64 -> double conversion is done by hand so
// the stream does not depend on the standard library's distribution details.

#include <cmath>
#include <cstdint>
#include <random>

namespace aqs {

class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 significant bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Single fair bit, served from a 64-bit reservoir.
  int bit() {
    if (reservoir_left_ == 0) {
      reservoir_ = next_u64();
      reservoir_left_ = 64;
    }
    int b = static_cast<int>(reservoir_ & 1u);
    reservoir_ >>= 1;
    --reservoir_left_;
    return b;
  }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) return 0;
    int v = static_cast<int>(uniform() * n);
    return v < n ? v : n - 1;
  }

  // Standard normal via Box-Muller, caching the paired value.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t reservoir_ = 0;
  int reservoir_left_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace aqs
