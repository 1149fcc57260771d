#pragma once

#include <cstdint>
#include <random>

namespace ccov {

// Reproducible random streams.
//
// Every projection matrix is keyed by (master_seed, stream_index). The key is
// turned into a 64-bit engine seed by two rounds of the SplitMix64 finalizer
// and fed to std::mt19937_64, whose output sequence is fixed by the C++
// standard. Uniform and normal variates are derived from raw 64-bit outputs
// here rather than through <random> distributions, whose algorithms are
// implementation-defined. Together this makes generated matrices identical
// across platforms and standard libraries for a given seed.

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Engine seed for stream `index` under `master_seed`.
constexpr std::uint64_t stream_seed(std::uint64_t master_seed,
                                    std::uint64_t index) noexcept {
  return splitmix64(master_seed ^ splitmix64(index));
}

class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t index)
      : engine_(stream_seed(master_seed, index)) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on (0, 1]; 53 random mantissa bits.
  double uniform_open0() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool coin() { return (engine_() >> 63) != 0; }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ccov
