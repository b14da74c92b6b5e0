#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "pbrmat/dual.hpp"
#include "pbrmat/rng.hpp"
#include "pbrmat/shader.hpp"

namespace pbrmat {

inline constexpr int kNumParams = 9;

// Unconstrained per-pixel parameter order. nx/ny are free tangent components
// of the normal; everything else lives in (0,1) behind a logistic squash.
enum ParamIndex : int {
  kParamNx = 0,
  kParamNy = 1,
  kParamDisp = 2,
  kParamDr = 3,
  kParamDg = 4,
  kParamDb = 5,
  kParamRough = 6,
  kParamSpec = 7,
  kParamSss = 8,
};

using DualScalar = Dual<kNumParams>;

struct PixelParams {
  std::array<double, kNumParams> t{};
};

// Logistic squash R -> (0,1), evaluated on the non-overflowing branch.
template <typename T>
inline T squash(const T& t) {
  using std::exp;
  if (value_of(t) >= 0.0) return 1.0 / (1.0 + exp(-t));
  T e = exp(t);
  return e / (1.0 + e);
}

// Inverse squash. Values are pulled into [kSquashClamp, 1-kSquashClamp]
// first since exactly 0 and 1 have no finite preimage.
inline constexpr double kSquashClamp = 1e-5;

inline double unsquash(double v) {
  double c = std::clamp(v, kSquashClamp, 1.0 - kSquashClamp);
  return std::log(c / (1.0 - c));
}

template <typename T>
struct DecodedPixel {
  SurfaceState<T> surface;
  T displacement;
};

// Constrained material from unconstrained parameters. The normal completes
// nx/ny with nz = sqrt(max(1e-6, 1 - nx^2 - ny^2)) and renormalizes, so it
// stays unit with nz > 0 for any parameter values.
template <typename T>
inline DecodedPixel<T> decode_pixel(const std::array<T, kNumParams>& t) {
  using std::sqrt;
  T nx = t[kParamNx];
  T ny = t[kParamNy];
  T nz = sqrt(clamp_min(1.0 - nx * nx - ny * ny, 1e-6));
  DecodedPixel<T> out;
  out.surface.normal = normalize(Vec3<T>{nx, ny, nz});
  out.surface.diffuse = {squash(t[kParamDr]), squash(t[kParamDg]),
                         squash(t[kParamDb])};
  out.surface.roughness = squash(t[kParamRough]);
  out.surface.specular = squash(t[kParamSpec]);
  out.surface.sss = squash(t[kParamSss]);
  out.displacement = squash(t[kParamDisp]);
  return out;
}

// Unconstrained parameters reproducing the stored pixel (up to the squash
// clamp at the channel boundaries).
inline PixelParams encode_pixel(const MaterialMaps& maps, int x, int y) {
  PixelParams p;
  Vec3d n = normalize(Vec3d{maps.normal.at(x, y, 0) * 2.0 - 1.0,
                            maps.normal.at(x, y, 1) * 2.0 - 1.0,
                            maps.normal.at(x, y, 2) * 2.0 - 1.0});
  p.t[kParamNx] = n.x;
  p.t[kParamNy] = n.y;
  p.t[kParamDisp] = unsquash(maps.displacement.at(x, y, 0));
  p.t[kParamDr] = unsquash(maps.diffuse.at(x, y, 0));
  p.t[kParamDg] = unsquash(maps.diffuse.at(x, y, 1));
  p.t[kParamDb] = unsquash(maps.diffuse.at(x, y, 2));
  p.t[kParamRough] = unsquash(maps.roughness.at(x, y, 0));
  p.t[kParamSpec] = unsquash(maps.specular.at(x, y, 0));
  p.t[kParamSss] = unsquash(maps.sss.at(x, y, 0));
  return p;
}

struct ShadeJacobian {
  Vec3d value;
  // d[channel][param]: partials of the shaded R,G,B with respect to each
  // unconstrained parameter.
  std::array<std::array<double, kNumParams>, 3> d{};
};

inline ShadeJacobian shade_pixel_with_partials(const PixelParams& p,
                                               const LightRig& rig) {
  std::array<DualScalar, kNumParams> t;
  for (int i = 0; i < kNumParams; ++i) t[i] = DualScalar::seed(p.t[i], i);
  DecodedPixel<DualScalar> dec = decode_pixel(t);
  std::array<DualScalar, 3> rgb = shade_pixel_core(dec.surface, rig);
  ShadeJacobian j;
  j.value = {rgb[0].v, rgb[1].v, rgb[2].v};
  for (int c = 0; c < 3; ++c) j.d[c] = rgb[c].d;
  return j;
}

inline Vec3d shade_from_params(const PixelParams& p, const LightRig& rig) {
  DecodedPixel<double> dec = decode_pixel(p.t);
  std::array<double, 3> rgb = shade_pixel_core(dec.surface, rig);
  return {rgb[0], rgb[1], rgb[2]};
}

struct FdReport {
  double max_rel_err = 0.0;
  int worst_param = -1;
  int worst_channel = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central differences in each unconstrained parameter against the dual-path
// Jacobian. Relative error is measured against max(|analytic|, 1e-6) so
// near-zero entries do not explode the ratio.
inline FdReport finite_difference_check(const PixelParams& p,
                                        const LightRig& rig, double h) {
  ShadeJacobian j = shade_pixel_with_partials(p, rig);
  FdReport rep;
  for (int k = 0; k < kNumParams; ++k) {
    PixelParams hi = p, lo = p;
    hi.t[k] += h;
    lo.t[k] -= h;
    Vec3d fh = shade_from_params(hi, rig);
    Vec3d fl = shade_from_params(lo, rig);
    double num[3] = {(fh.x - fl.x) / (2.0 * h), (fh.y - fl.y) / (2.0 * h),
                     (fh.z - fl.z) / (2.0 * h)};
    for (int c = 0; c < 3; ++c) {
      double rel = std::abs(j.d[c][k] - num[c]) /
                   std::max(std::abs(j.d[c][k]), 1e-6);
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = k;
        rep.worst_channel = c;
        rep.worst_analytic = j.d[c][k];
        rep.worst_numeric = num[c];
      }
    }
  }
  return rep;
}

struct GradcheckConfig {
  PixelParams params;
  LightRig rig;
};

// Seeded random configuration for derivative checks. Draws are rejected when
// they sit within finite-difference reach of a shading kink: a light grazing
// the horizon, the nz clamp, or a specular lobe narrower than the step can
// resolve (tiny roughness).
inline GradcheckConfig make_gradcheck_config(std::uint64_t seed,
                                             std::uint64_t index) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    std::uint64_t ctr = index * 256 + attempt;
    auto u = [&](std::uint32_t lane) {
      return rng::uniform(seed, rng::Stream::kGradcheck, ctr, lane);
    };
    GradcheckConfig cfg;
    double nx = -0.68 + 1.36 * u(0);
    double ny = -0.68 + 1.36 * u(1);
    if (nx * nx + ny * ny > 0.9) continue;
    cfg.params.t[kParamNx] = nx;
    cfg.params.t[kParamNy] = ny;
    cfg.params.t[kParamDisp] = -3.0 + 6.0 * u(2);
    cfg.params.t[kParamDr] = -3.0 + 6.0 * u(3);
    cfg.params.t[kParamDg] = -3.0 + 6.0 * u(4);
    cfg.params.t[kParamDb] = -3.0 + 6.0 * u(5);
    cfg.params.t[kParamRough] = -2.5 + 5.0 * u(6);
    cfg.params.t[kParamSpec] = -3.0 + 6.0 * u(7);
    cfg.params.t[kParamSss] = -3.0 + 6.0 * u(8);

    Vec3d n = decode_pixel(cfg.params.t).surface.normal;
    int n_lights = 1 + static_cast<int>(u(9) * 3.0);
    bool ok = true;
    for (int li = 0; li < n_lights; ++li) {
      std::uint32_t base = 10 + 6 * static_cast<std::uint32_t>(li);
      double z = -1.0 + 2.0 * u(base);
      double phi = 2.0 * std::numbers::pi * u(base + 1);
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      Vec3d dir{r * std::cos(phi), r * std::sin(phi), z};
      if (std::abs(dot(n, dir)) < 0.05) {
        ok = false;
        break;
      }
      Vec3d intensity{0.5 + 7.5 * u(base + 2), 0.5 + 7.5 * u(base + 3),
                      0.5 + 7.5 * u(base + 4)};
      cfg.rig.push_back({dir, intensity});
    }
    if (ok) return cfg;
  }
}

}  // namespace pbrmat
