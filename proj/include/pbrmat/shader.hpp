#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include "pbrmat/dual.hpp"
#include "pbrmat/lighting.hpp"
#include "pbrmat/material.hpp"
#include "pbrmat/parallel.hpp"
#include "pbrmat/vec.hpp"

namespace pbrmat {

// Orthographic camera looking down -Z at a plane of size extent_x * extent_y
// centered on the origin; displacement maps [0,1] onto a z slab of z_range.
struct CameraModel {
  double extent_x = 2.0;
  double extent_y = 2.0;
  double z_range = 0.5;
};

inline Vec3d reconstruct_position(int u, int v, int width, int height,
                                  double disp, const CameraModel& cam) {
  double x = ((u + 0.5) / width * 2.0 - 1.0) * cam.extent_x / 2.0;
  double y = (1.0 - (v + 0.5) / height * 2.0) * cam.extent_y / 2.0;
  double z = (disp - 0.5) * cam.z_range;
  return {x, y, z};
}

// Decoded material of a single pixel, linear space.
struct PixelMaterial {
  Vec3d position{};
  Vec3d normal{0.0, 0.0, 1.0};
  Vec3d diffuse{};
  double roughness = 0.0;
  double specular = 0.0;
  double sss = 0.0;
};

// The subset of PixelMaterial that shading differentiates through,
// templated over the scalar type so dual numbers flow through the very same
// expressions as plain doubles.
template <typename T>
struct SurfaceState {
  Vec3<T> normal;
  Vec3<T> diffuse;
  T roughness;
  T specular;
  T sss;
};

template <typename T>
inline T pow5(const T& x) {
  T x2 = x * x;
  return x2 * x2 * x;
}

// Isotropic single-layer BRDF: a Burley-style diffuse lobe blended against a
// flattened subsurface lobe by `sss`, plus a gray GGX/Smith specular lobe
// with Schlick Fresnel (F0 = 0.08 * specular). Directions must be unit and
// the result is zero unless both land in the normal's hemisphere.
template <typename T>
inline std::array<T, 3> eval_bsdf_core(const SurfaceState<T>& m,
                                       const Vec3d& wi, const Vec3d& wo) {
  constexpr double kPi = std::numbers::pi;
  T n_wi = dot(m.normal, wi);
  T n_wo = dot(m.normal, wo);
  if (value_of(n_wi) <= 0.0 || value_of(n_wo) <= 0.0)
    return {T(0.0), T(0.0), T(0.0)};

  Vec3d h = normalize(wi + wo);
  T n_h = dot(m.normal, h);
  double h_wo = dot(h, wo);
  double h_wi = dot(h, wi);

  T alpha = clamp_min(m.roughness * m.roughness, 1e-4);
  T alpha2 = alpha * alpha;

  T f0 = 0.08 * m.specular;
  T fresnel = f0 + (1.0 - f0) * pow5(1.0 - h_wo);
  T dd = n_h * n_h * (alpha2 - 1.0) + 1.0;
  T ndf = alpha2 / (kPi * dd * dd);
  auto g1 = [&](const T& n_w) {
    using std::sqrt;
    return 2.0 * n_w / (n_w + sqrt(alpha2 + (1.0 - alpha2) * n_w * n_w));
  };
  T gsmith = g1(n_wi) * g1(n_wo);
  T spec = ndf * fresnel * gsmith / (4.0 * n_wi * n_wo);

  T fd90 = 0.5 + 2.0 * m.roughness * (h_wi * h_wi);
  T s_wi = 1.0 + (fd90 - 1.0) * pow5(1.0 - n_wi);
  T s_wo = 1.0 + (fd90 - 1.0) * pow5(1.0 - n_wo);

  T fss90 = m.roughness * (h_wi * h_wi);
  T fss_wi = 1.0 + (fss90 - 1.0) * pow5(1.0 - n_wi);
  T fss_wo = 1.0 + (fss90 - 1.0) * pow5(1.0 - n_wo);
  T ss_shape = fss_wi * fss_wo * (1.0 / (n_wi + n_wo) - 0.5) + 0.5;

  auto lobe = [&](const T& d) {
    T f_d = (d / kPi) * s_wi * s_wo;
    T f_ss = 1.25 * (d / kPi) * ss_shape;
    return (1.0 - m.sss) * f_d + m.sss * f_ss + spec;
  };
  return {lobe(m.diffuse.x), lobe(m.diffuse.y), lobe(m.diffuse.z)};
}

// Radiance toward the camera (wo fixed at +Z) contributed by one light:
// intensity * f_r * max(0, wi.n). Directional lights only, so position
// never enters.
template <typename T>
inline std::array<T, 3> shade_one_light(const SurfaceState<T>& m,
                                        const DirectionalLight& light) {
  static const Vec3d wo{0.0, 0.0, 1.0};
  std::array<T, 3> f = eval_bsdf_core(m, light.direction, wo);
  T cosw = relu(dot(m.normal, light.direction));
  return {light.intensity.x * (f[0] * cosw), light.intensity.y * (f[1] * cosw),
          light.intensity.z * (f[2] * cosw)};
}

template <typename T>
inline std::array<T, 3> shade_pixel_core(const SurfaceState<T>& m,
                                         const LightRig& rig) {
  std::array<T, 3> out{T(0.0), T(0.0), T(0.0)};
  for (const DirectionalLight& light : rig) {
    std::array<T, 3> one = shade_one_light(m, light);
    out[0] = out[0] + one[0];
    out[1] = out[1] + one[1];
    out[2] = out[2] + one[2];
  }
  return out;
}

namespace detail {
inline void check_unit(const Vec3d& v, const char* what) {
  double n = norm(v);
  if (std::abs(n - 1.0) > 1e-3)
    throw std::invalid_argument(std::string(what) + " must be unit length");
}
}  // namespace detail

inline Vec3d eval_bsdf(const PixelMaterial& m, const Vec3d& wi,
                       const Vec3d& wo) {
  detail::check_unit(wi, "eval_bsdf: wi");
  detail::check_unit(wo, "eval_bsdf: wo");
  detail::check_unit(m.normal, "eval_bsdf: normal");
  SurfaceState<double> s{m.normal, m.diffuse, m.roughness, m.specular, m.sss};
  std::array<double, 3> f = eval_bsdf_core(s, wi, wo);
  return {f[0], f[1], f[2]};
}

inline Vec3d shade_pixel(const PixelMaterial& m, const LightRig& rig) {
  detail::check_unit(m.normal, "shade_pixel: normal");
  for (const DirectionalLight& l : rig)
    detail::check_unit(l.direction, "shade_pixel: light direction");
  SurfaceState<double> s{m.normal, m.diffuse, m.roughness, m.specular, m.sss};
  std::array<double, 3> out = shade_pixel_core(s, rig);
  return {out[0], out[1], out[2]};
}

inline PixelMaterial material_at(const MaterialMaps& maps, int x, int y,
                                 const CameraModel& cam) {
  PixelMaterial m;
  Vec3d n{maps.normal.at(x, y, 0) * 2.0 - 1.0,
          maps.normal.at(x, y, 1) * 2.0 - 1.0,
          maps.normal.at(x, y, 2) * 2.0 - 1.0};
  m.normal = normalize(n);
  m.diffuse = {maps.diffuse.at(x, y, 0), maps.diffuse.at(x, y, 1),
               maps.diffuse.at(x, y, 2)};
  m.roughness = maps.roughness.at(x, y, 0);
  m.specular = maps.specular.at(x, y, 0);
  m.sss = maps.sss.at(x, y, 0);
  m.position = reconstruct_position(x, y, maps.width(), maps.height(),
                                    maps.displacement.at(x, y, 0), cam);
  return m;
}

// Renders the masked pixels under the rig; unmasked pixels stay (0,0,0).
inline Image render_image(const MaterialMaps& maps, const LightRig& rig,
                          const CameraModel& cam = {}, int threads = 1) {
  std::vector<MapViolation> violations = validate_maps(maps);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  for (const DirectionalLight& l : rig)
    detail::check_unit(l.direction, "render_image: light direction");

  int w = maps.width(), h = maps.height();
  Image out(w, h, 3);
  parallel_for(static_cast<std::int64_t>(w) * h, threads, [&](std::int64_t i) {
    int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    if (maps.mask.at(x, y, 0) != 1.0f) return;
    PixelMaterial m = material_at(maps, x, y, cam);
    SurfaceState<double> s{m.normal, m.diffuse, m.roughness, m.specular,
                           m.sss};
    std::array<double, 3> rgb = shade_pixel_core(s, rig);
    out.at(x, y, 0) = static_cast<float>(rgb[0]);
    out.at(x, y, 1) = static_cast<float>(rgb[1]);
    out.at(x, y, 2) = static_cast<float>(rgb[2]);
  });
  return out;
}

// Exposure, clamp to [0,1], sRGB transfer, round to the nearest 8-bit code.
inline std::uint8_t to_srgb8(double v, double exposure = 1.0) {
  double y = clamp01(exposure * v);
  double s =
      y <= 0.0031308 ? 12.92 * y : 1.055 * std::pow(y, 1.0 / 2.4) - 0.055;
  return static_cast<std::uint8_t>(std::lround(s * 255.0));
}

}  // namespace pbrmat
