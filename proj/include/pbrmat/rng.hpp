#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace pbrmat::rng {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter, lane), so results never depend on call order or
// on how work is split across threads.

inline constexpr std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Streams keep draws for unrelated purposes decorrelated under one seed.
enum class Stream : std::uint64_t {
  kTrainingLight = 1,
  kBumpShape = 2,
  kRegionSite = 3,
  kRegionColor = 4,
  kDiffuseNoise = 5,
  kObservationNoise = 6,
  kGradcheck = 7,
};

inline double uniform(std::uint64_t seed, Stream stream, std::uint64_t counter,
                      std::uint32_t lane) {
  std::uint64_t h = splitmix(seed ^ 0x6a09e667f3bcc908ull);
  h = splitmix(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix(h ^ counter);
  h = splitmix(h ^ lane);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; each result burns two uniform lanes.
inline double gaussian(std::uint64_t seed, Stream stream, std::uint64_t counter,
                       std::uint32_t lane) {
  double u1 = uniform(seed, stream, counter, 2 * lane);
  double u2 = uniform(seed, stream, counter, 2 * lane + 1);
  double r = std::sqrt(-2.0 * std::log1p(-u1));  // 1-u1 in (0,1], no log(0)
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace pbrmat::rng
