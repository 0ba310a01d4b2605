#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace syntheval {

// Counter-based 64-bit generator.
//
// Draw i is mix64(seed + (i+1) * GAMMA) where GAMMA is the SplitMix64
// golden-ratio increment and mix64 is the SplitMix64 finalizer. The output
// stream is a pure function of (seed, draw index), so any consumer that
// draws in a fixed order is reproducible across platforms and runs.
//
// Split rule for derived streams: seed XOR stream_index (used e.g. for
// per-slice corruption seeds), or mix_seed() for labeled substreams.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() {
    counter_ += 1;
    std::uint64_t z = seed_ + counter_ * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - next_unit();  // (0, 1], keeps log() finite
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a over a label plus two integers, folded into the base seed with the
// SplitMix64 finalizer. Gives independent labeled substreams from one seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view label,
                              std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto eat = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  };
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  eat(a);
  eat(b);
  std::uint64_t z = seed ^ h;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace syntheval
