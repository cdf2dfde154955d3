#pragma once

#include <cstdint>
#include <random>

namespace ewps {

using Engine = std::mt19937_64;

// Uniform draw on the open interval (0, 1) with 53 random bits. Unlike
// std::uniform_real_distribution the mapping is fixed, so streams are
// reproducible across standard libraries.
inline double uniform_open(Engine& rng) {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  return (static_cast<double>(rng() >> 11) + 0.5) * kScale;
}

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

}  // namespace ewps
