#pragma once

#include <cstdint>
#include <random>

namespace tripod {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Deterministic uniform stream. The raw engine output is mapped to (0,1)
// by hand instead of through std::uniform_real_distribution, whose mapping
// is implementation-defined; results are therefore reproducible across
// standard libraries. The open interval matters: waiting-time sampling
// compares survival norms against the draw and must never see 0 or 1.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Seed for trajectory `index` in a batch keyed by `master`. Streams for
// distinct indices are decorrelated by the splitmix64 avalanche; the rule is
// part of the reproducibility contract (batch results are a pure function of
// the master seed, independent of threading or chunking).
inline std::uint64_t trajectory_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ ((index + 1) * 0x9E3779B97F4A7C15ULL));
}

}  // namespace tripod
