#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mhntf {

/// Seeded source for factor initialization and synthetic noise.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The standard distributions are not (their algorithms are
/// implementation-defined), so both variates are derived here by hand:
///
///   uniform()  = ((bits >> 11) + 0.5) * 2^-53          strictly inside (0, 1)
///   gaussian() = Box-Muller on two consecutive uniforms, cosine branch only
///
/// Any implementation that follows these two formulas reproduces the same
/// initial factors and the same noise for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() {
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    return (static_cast<double>(engine_() >> 11) + 0.5) * kScale;
  }

  double gaussian(double sigma) {
    const double u1 = uniform();
    const double u2 = uniform();
    return sigma * std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mhntf
