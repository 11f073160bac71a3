#pragma once

#include <cmath>
#include <cstdint>

namespace tomoboost {

// SplitMix64 mixer. Small enough to open one generator per pixel, which is
// what makes per-pixel random streams cheap and order-independent.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based random stream: the state is a pure function of
// (seed, stream, row, col), so any worker can draw the same values for a
// pixel regardless of scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(state) {}

  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t row, std::uint64_t col)
      : state_(mix64(mix64(mix64(mix64(seed) ^ stream) ^ row) ^ col)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; one spare value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 6.283185307179586476925287 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream ids keep independent uses of the same scene seed decoupled.
namespace streams {
constexpr std::uint64_t kTerrain = 0x11;
constexpr std::uint64_t kCanopy = 0x22;
constexpr std::uint64_t kSpeckle = 0x33;
constexpr std::uint64_t kPhaseScreen = 0x44;  // + acquisition index
constexpr std::uint64_t kSplitShuffle = 0x55;
}  // namespace streams

}  // namespace tomoboost
