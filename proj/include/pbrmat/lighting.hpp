#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbrmat/image.hpp"
#include "pbrmat/rng.hpp"
#include "pbrmat/vec.hpp"

namespace pbrmat {

struct DirectionalLight {
  Vec3d direction;  // unit vector toward the light
  Vec3d intensity;  // RGB radiance carried along that direction
};

using LightRig = std::vector<DirectionalLight>;

// 36 directions in the XOZ and YOZ planes at 10-degree steps over the upper
// hemisphere. Nominal angles are {0,10,...,180} per plane; the zenith slot
// (90 degrees in either plane) is the one direction both planes share, so it
// is dropped from both, leaving 18 + 18 distinct lights.
inline LightRig build_fixed_rig(double intensity = 5.0) {
  LightRig rig;
  rig.reserve(36);
  for (int plane = 0; plane < 2; ++plane) {
    for (int k = 0; k <= 18; ++k) {
      if (k == 9) continue;  // zenith
      double theta = k * 10.0 * std::numbers::pi / 180.0;
      double c = std::cos(theta), s = std::sin(theta);
      Vec3d dir = plane == 0 ? Vec3d{c, 0.0, s} : Vec3d{0.0, c, s};
      rig.push_back({dir, {intensity, intensity, intensity}});
    }
  }
  return rig;
}

// One light drawn uniformly in z over the upper hemisphere:
// z = u1, phi = 2*pi*u2, gray intensity 3 + 5*u3. A pure function of
// (seed, counter), so any schedule replays the same light.
inline DirectionalLight sample_random_light(std::uint64_t seed,
                                            std::uint64_t counter) {
  double u1 = rng::uniform(seed, rng::Stream::kTrainingLight, counter, 0);
  double u2 = rng::uniform(seed, rng::Stream::kTrainingLight, counter, 1);
  double u3 = rng::uniform(seed, rng::Stream::kTrainingLight, counter, 2);
  double z = u1;
  double r = std::sqrt(1.0 - z * z);
  double phi = 2.0 * std::numbers::pi * u2;
  double e = 3.0 + 5.0 * u3;
  return {{r * std::cos(phi), r * std::sin(phi), z}, {e, e, e}};
}

// Per-step training rig: the 36 fixed lights plus one random light whose
// counter is the step index.
inline LightRig build_training_rig(std::uint64_t seed, std::uint64_t step,
                                   double fixed_intensity = 5.0) {
  LightRig rig = build_fixed_rig(fixed_intensity);
  rig.push_back(sample_random_light(seed, step));
  return rig;
}

// Lat-long radiance map: width = 2 * height, row v spans polar angle
// pi*v/H .. pi*(v+1)/H measured from the +Z pole.
struct EnvironmentMap {
  Image radiance;
};

inline EnvironmentMap make_envmap(Image radiance) {
  if (radiance.channels() != 3)
    throw std::invalid_argument("environment map must have 3 channels");
  if (radiance.width() != 2 * radiance.height())
    throw std::invalid_argument("environment map must be 2:1 lat-long");
  return {std::move(radiance)};
}

// Collapses the map onto a coarse lat-long grid of at most k texels (largest
// 2h*h grid that fits; a 1x1 grid when k == 1) and emits one directional
// light per coarse texel: direction at the texel center, intensity equal to
// the summed radiance*solid-angle of the source texels it covers. Total
// power is conserved exactly, so a uniform unit map integrates to 4*pi.
inline LightRig envmap_to_lights(const EnvironmentMap& env, int k) {
  const Image& img = env.radiance;
  int W = img.width(), H = img.height();
  long texels = static_cast<long>(W) * H;
  if (k < 1) throw std::invalid_argument("envmap_to_lights: k must be >= 1");
  if (k > texels)
    throw std::invalid_argument("envmap_to_lights: k exceeds texel count");

  int gh = std::max(1, static_cast<int>(std::floor(std::sqrt(k / 2.0))));
  int gw = 2 * gh;
  if (k == 1) gw = gh = 1;

  std::vector<Vec3d> power(static_cast<std::size_t>(gw) * gh, Vec3d{});
  double dphi = 2.0 * std::numbers::pi / W;
  for (int v = 0; v < H; ++v) {
    double t0 = std::numbers::pi * v / H;
    double t1 = std::numbers::pi * (v + 1) / H;
    double omega = dphi * (std::cos(t0) - std::cos(t1));  // per texel in row v
    int cv = std::min(gh - 1, static_cast<int>((v + 0.5) * gh / H));
    for (int u = 0; u < W; ++u) {
      int cu = std::min(gw - 1, static_cast<int>((u + 0.5) * gw / W));
      Vec3d& acc = power[static_cast<std::size_t>(cv) * gw + cu];
      acc.x += img.at(u, v, 0) * omega;
      acc.y += img.at(u, v, 1) * omega;
      acc.z += img.at(u, v, 2) * omega;
    }
  }

  LightRig rig;
  rig.reserve(power.size());
  for (int cv = 0; cv < gh; ++cv)
    for (int cu = 0; cu < gw; ++cu) {
      double theta = std::numbers::pi * (cv + 0.5) / gh;
      double phi = 2.0 * std::numbers::pi * (cu + 0.5) / gw;
      Vec3d dir{std::sin(theta) * std::cos(phi),
                std::sin(theta) * std::sin(phi), std::cos(theta)};
      rig.push_back({dir, power[static_cast<std::size_t>(cv) * gw + cu]});
    }
  return rig;
}

// One light per line: "dx dy dz ir ig ib", 9 significant digits.
inline std::string format_rig(const LightRig& rig) {
  std::string out;
  char buf[160];
  for (const DirectionalLight& l : rig) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g %.9g %.9g\n",
                  l.direction.x, l.direction.y, l.direction.z, l.intensity.x,
                  l.intensity.y, l.intensity.z);
    out += buf;
  }
  return out;
}

}  // namespace pbrmat
