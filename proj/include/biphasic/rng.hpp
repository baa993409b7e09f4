#pragma once

#include <cstdint>
#include <cmath>
#include <string>
#include <string_view>

namespace bp {

// Deterministic PRNG used everywhere in the project. std:: distributions are
// implementation-defined, so all draws are hand-rolled on top of splitmix64
// to keep artifacts byte-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Derives an independent stream, e.g. per sample or per network name.
  // Streams depend only on (seed, tag), not on draw order.
  static Rng derive(uint64_t seed, uint64_t tag) {
    Rng mix(seed ^ 0x6a09e667f3bcc908ULL);
    mix.state_ ^= tag * 0x9e3779b97f4a7c15ULL;
    mix.next_u64();
    return Rng(mix.next_u64());
  }

  static Rng derive(uint64_t seed, std::string_view tag) {
    // FNV-1a over the tag
    uint64_t h = 1469598103934665603ULL;
    for (char c : tag) {
      h ^= static_cast<uint8_t>(c);
      h *= 1099511628211ULL;
    }
    return derive(seed, h);
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace bp
