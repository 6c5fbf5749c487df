#pragma once

// Seeded, portable random numbers: xoshiro256++ states initialized from a
// 64-bit seed via splitmix64. Identical seeds produce identical streams on
// every platform; experiment reproducibility leans on this.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "actprobe/matrix.hpp"

namespace actprobe {

class InvalidRange : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
};

class Rng {
public:
  explicit Rng(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& word : state_) word = sm.next();
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53 significant bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi); lo itself when the range is degenerate.
  /// Throws InvalidRange when lo > hi.
  double uniform(double lo, double hi) {
    if (lo > hi) throw InvalidRange("uniform: lo > hi");
    if (lo == hi) {
      next_u64();  // still advances the stream, call count stays seed-determined
      return lo;
    }
    const double v = lo + next_double() * (hi - lo);
    return v < hi ? v : std::nextafter(hi, lo);
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_;
};

struct LinearInit {
  Matrix weights;            // fan_out x fan_in
  std::vector<double> bias;  // fan_out
};

/// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; weights are drawn
/// row-major first, then the bias, so layouts are reproducible from the seed.
inline LinearInit init_linear(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("init_linear: fan_in/fan_out < 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  LinearInit init{Matrix(fan_out, fan_in), std::vector<double>(fan_out)};
  for (auto& w : init.weights.values) w = rng.uniform(-bound, bound);
  for (auto& b : init.bias) b = rng.uniform(-bound, bound);
  return init;
}

}  // namespace actprobe
