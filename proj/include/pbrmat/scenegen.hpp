#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pbrmat/lighting.hpp"
#include "pbrmat/losses.hpp"
#include "pbrmat/material.hpp"
#include "pbrmat/parallel.hpp"
#include "pbrmat/rng.hpp"
#include "pbrmat/shader.hpp"

namespace pbrmat {

struct SceneSpec {
  std::uint64_t seed = 0;
  int width = 64;
  int height = 64;
  int num_regions = 6;
  std::vector<MaterialCategory> categories = {
      MaterialCategory::kHair, MaterialCategory::kSkin,
      MaterialCategory::kFabric, MaterialCategory::kLeather};
  int boundary_blur = 1;
};

struct Scene {
  MaterialMaps maps;
  RegionLabels labels;
};

namespace detail {

struct Bump {
  double cx, cy, sigma, amp;
};

// Three seeded Gaussian bumps; amplitudes are bounded so the 0.5 + 0.35*sum
// height stays inside [0.08, 0.92] and the safety clamp never fires, keeping
// the stored normals exact.
inline std::vector<Bump> scene_bumps(std::uint64_t seed) {
  std::vector<Bump> bumps(3);
  for (std::uint64_t i = 0; i < 3; ++i) {
    Bump& b = bumps[i];
    b.cx = 0.2 + 0.6 * rng::uniform(seed, rng::Stream::kBumpShape, i, 0);
    b.cy = 0.2 + 0.6 * rng::uniform(seed, rng::Stream::kBumpShape, i, 1);
    b.sigma = 0.1 + 0.15 * rng::uniform(seed, rng::Stream::kBumpShape, i, 2);
    double mag = 0.15 + 0.25 * rng::uniform(seed, rng::Stream::kBumpShape, i, 3);
    b.amp = rng::uniform(seed, rng::Stream::kBumpShape, i, 4) < 0.5 ? -mag : mag;
  }
  return bumps;
}

inline double bump_height(const std::vector<Bump>& bumps, double s, double t) {
  double sum = 0.0;
  for (const Bump& b : bumps) {
    double ds = s - b.cx, dt = t - b.cy;
    sum += b.amp * std::exp(-(ds * ds + dt * dt) / (2.0 * b.sigma * b.sigma));
  }
  return 0.5 + 0.35 * sum;
}

// d(height)/ds and d(height)/dt of the bump field.
inline void bump_slopes(const std::vector<Bump>& bumps, double s, double t,
                        double& dds, double& ddt) {
  dds = 0.0;
  ddt = 0.0;
  for (const Bump& b : bumps) {
    double ds = s - b.cx, dt = t - b.cy;
    double g = b.amp * std::exp(-(ds * ds + dt * dt) / (2.0 * b.sigma * b.sigma));
    dds += 0.35 * g * (-ds / (b.sigma * b.sigma));
    ddt += 0.35 * g * (-dt / (b.sigma * b.sigma));
  }
}

inline bool inside_ellipse(double s, double t) {
  double u = 2.0 * s - 1.0, v = 2.0 * t - 1.0;
  return u * u + v * v <= 1.0;
}

// Mask-aware box blur of a single-channel image, window (2r+1)^2, averaging
// only masked neighbors. Unmasked pixels stay untouched.
inline Image masked_box_blur(const Image& src, const Image& mask, int radius) {
  if (radius <= 0) return src;
  Image out = src;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      if (mask.at(x, y, 0) != 1.0f) continue;
      double acc = 0.0;
      int count = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= src.width() || ny >= src.height())
            continue;
          if (mask.at(nx, ny, 0) != 1.0f) continue;
          acc += src.at(nx, ny, 0);
          ++count;
        }
      }
      out.at(x, y, 0) = static_cast<float>(acc / count);
    }
  }
  return out;
}

}  // namespace detail

// Builds a synthetic ground-truth scene: elliptical mask, smooth bump height
// field with analytically consistent normals, nearest-site material regions
// with per-category reflectance rows, and per-region colored diffuse with a
// low-frequency tint wave.
inline Scene generate_scene(const SceneSpec& spec, const CameraModel& cam = {}) {
  if (spec.width < 16 || spec.height < 16)
    throw std::invalid_argument("generate_scene: size must be at least 16x16");
  if (spec.num_regions < 1)
    throw std::invalid_argument("generate_scene: need at least one region");
  if (spec.categories.empty())
    throw std::invalid_argument("generate_scene: category list is empty");
  if (spec.boundary_blur < 0)
    throw std::invalid_argument("generate_scene: blur radius must be >= 0");

  const int w = spec.width, h = spec.height;
  Scene scene;
  scene.maps = make_maps(w, h);
  scene.labels = make_labels(w, h);
  MaterialMaps& m = scene.maps;

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = (x + 0.5) / w, t = (y + 0.5) / h;
      m.mask.at(x, y, 0) = detail::inside_ellipse(s, t) ? 1.0f : 0.0f;
    }

  // Height field, normals from its exact gradient. World axes scale texture
  // slopes by extent, and v runs top-down while world y runs up, hence the
  // sign flip on the t slope.
  std::vector<detail::Bump> bumps = detail::scene_bumps(spec.seed);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m.mask.at(x, y, 0) != 1.0f) continue;
      double s = (x + 0.5) / w, t = (y + 0.5) / h;
      double height = std::clamp(detail::bump_height(bumps, s, t), 0.05, 0.95);
      m.displacement.at(x, y, 0) = static_cast<float>(height);
      double dds, ddt;
      detail::bump_slopes(bumps, s, t, dds, ddt);
      Vec3d n = normalize(Vec3d{-cam.z_range * dds / cam.extent_x,
                                cam.z_range * ddt / cam.extent_y, 1.0});
      m.normal.at(x, y, 0) = static_cast<float>((n.x + 1.0) * 0.5);
      m.normal.at(x, y, 1) = static_cast<float>((n.y + 1.0) * 0.5);
      m.normal.at(x, y, 2) = static_cast<float>((n.z + 1.0) * 0.5);
    }
  }

  // Region sites, rejection-sampled into the mask; categories round-robin
  // over the allowed list.
  struct Site {
    double s, t;
    MaterialCategory category;
  };
  std::vector<Site> sites(static_cast<std::size_t>(spec.num_regions));
  for (int i = 0; i < spec.num_regions; ++i) {
    Site& site = sites[i];
    bool placed = false;
    for (std::uint64_t attempt = 0; attempt < 256 && !placed; ++attempt) {
      std::uint64_t ctr = static_cast<std::uint64_t>(i) * 256 + attempt;
      double s = rng::uniform(spec.seed, rng::Stream::kRegionSite, ctr, 0);
      double t = rng::uniform(spec.seed, rng::Stream::kRegionSite, ctr, 1);
      if (detail::inside_ellipse(s, t)) {
        site.s = s;
        site.t = t;
        placed = true;
      }
    }
    if (!placed) throw std::logic_error("generate_scene: site sampling failed");
    site.category = spec.categories[i % spec.categories.size()];
  }

  Image site_of(w, h, 1, -1.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m.mask.at(x, y, 0) != 1.0f) continue;
      double s = (x + 0.5) / w, t = (y + 0.5) / h;
      int best = 0;
      double best_d = 1e30;
      for (int i = 0; i < spec.num_regions; ++i) {
        double ds = s - sites[i].s, dt = t - sites[i].t;
        double d = ds * ds + dt * dt;
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      site_of.at(x, y, 0) = static_cast<float>(best);
      scene.labels.idx.at(x, y, 0) =
          static_cast<float>(static_cast<int>(sites[best].category));
      CategoryParams row = category_params(sites[best].category);
      m.roughness.at(x, y, 0) = static_cast<float>(row.roughness);
      m.specular.at(x, y, 0) = static_cast<float>(row.specular);
      m.sss.at(x, y, 0) = static_cast<float>(row.sss);
    }
  }
  m.roughness = detail::masked_box_blur(m.roughness, m.mask, spec.boundary_blur);
  m.specular = detail::masked_box_blur(m.specular, m.mask, spec.boundary_blur);
  m.sss = detail::masked_box_blur(m.sss, m.mask, spec.boundary_blur);

  // Diffuse: per-region base color plus a low-frequency sinusoidal tint.
  // Base in [0.15, 0.85] and wave amplitude 0.08 keep values in [0.07, 0.93].
  double wave[3][3];
  for (int c = 0; c < 3; ++c) {
    std::uint64_t lane = static_cast<std::uint64_t>(c) * 3;
    wave[c][0] = 0.5 + 2.0 * rng::uniform(spec.seed, rng::Stream::kDiffuseNoise, 0, lane);
    wave[c][1] = 0.5 + 2.0 * rng::uniform(spec.seed, rng::Stream::kDiffuseNoise, 0, lane + 1);
    wave[c][2] = rng::uniform(spec.seed, rng::Stream::kDiffuseNoise, 0, lane + 2);
  }
  const double kTwoPi = 2.0 * std::numbers::pi;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m.mask.at(x, y, 0) != 1.0f) continue;
      double s = (x + 0.5) / w, t = (y + 0.5) / h;
      int region = static_cast<int>(site_of.at(x, y, 0));
      for (int c = 0; c < 3; ++c) {
        double base =
            0.15 + 0.7 * rng::uniform(spec.seed, rng::Stream::kRegionColor,
                                      static_cast<std::uint64_t>(region), c);
        double tint = std::sin(kTwoPi * (wave[c][0] * s + wave[c][1] * t + wave[c][2]));
        m.diffuse.at(x, y, c) = static_cast<float>(base + 0.08 * tint);
      }
    }
  }

  validate_maps(m);
  return scene;
}

// Renders the scene under every fixed-rig light, optionally corrupting each
// sample with clamped Gaussian noise. noise_sigma = 0 returns the clean
// renders bit-exactly.
inline ObservationSet render_observations(const MaterialMaps& maps,
                                          double noise_sigma, std::uint64_t seed,
                                          const CameraModel& cam = {},
                                          int threads = 1) {
  if (noise_sigma < 0.0)
    throw std::invalid_argument("render_observations: sigma must be >= 0");
  ObservationSet obs;
  obs.rig = build_fixed_rig();
  obs.mask = maps.mask;
  const std::size_t npx = maps.mask.pixel_count();
  for (std::size_t li = 0; li < obs.rig.size(); ++li) {
    LightRig single{obs.rig[li]};
    Image img = render_image(maps, single, cam, threads);
    if (noise_sigma > 0.0) {
      for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
          if (maps.mask.at(x, y, 0) != 1.0f) continue;
          std::uint64_t ctr = li * npx + static_cast<std::size_t>(y) * img.width() + x;
          for (int c = 0; c < 3; ++c) {
            double noisy =
                img.at(x, y, c) +
                noise_sigma * rng::gaussian(seed, rng::Stream::kObservationNoise,
                                            ctr, static_cast<std::uint64_t>(c));
            img.at(x, y, c) = static_cast<float>(std::max(0.0, noisy));
          }
        }
      }
    }
    obs.images.push_back(std::move(img));
  }
  return obs;
}

}  // namespace pbrmat
