#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbrmat/errors.hpp"
#include "pbrmat/image.hpp"
#include "pbrmat/lighting.hpp"
#include "pbrmat/material.hpp"
#include "pbrmat/png.hpp"
#include "pbrmat/shader.hpp"

namespace pbrmat {

// Peak signal-to-noise ratio over masked pixels, all channels pooled.
// Zero MSE returns the 99 dB cap so downstream CSV stays numeric.
inline double psnr(const Image& a, const Image& b, const Image& mask,
                   double max_value = 1.0) {
  if (!a.same_shape(b) || a.width() != mask.width() ||
      a.height() != mask.height() || mask.channels() != 1) {
    throw std::invalid_argument("psnr: image/mask dimensions do not align");
  }
  double sq = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask.at(x, y, 0) == 0.0f) continue;
      for (int c = 0; c < a.channels(); ++c) {
        double d = static_cast<double>(a.at(x, y, c)) - b.at(x, y, c);
        sq += d * d;
      }
      n += a.channels();
    }
  }
  if (n == 0) throw std::invalid_argument("psnr: mask selects no pixels");
  double mse = sq / static_cast<double>(n);
  if (mse == 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(max_value * max_value / mse));
}

// Nine white lights kept out of every training rig: the zenith plus two
// elevation rings sampled at diagonal azimuths (the fixed rig's lights all
// lie in the XOZ or YOZ planes, so these directions are never trained on).
inline LightRig default_heldout_rig(double intensity = 5.0) {
  LightRig rig;
  rig.push_back({{0.0, 0.0, 1.0}, {intensity, intensity, intensity}});
  const double kPi = std::numbers::pi;
  for (double psi_deg : {30.0, 60.0}) {
    for (double phi_deg : {45.0, 135.0, 225.0, 315.0}) {
      double psi = psi_deg * kPi / 180.0;
      double phi = phi_deg * kPi / 180.0;
      rig.push_back({{std::sin(psi) * std::cos(phi), std::sin(psi) * std::sin(phi),
                      std::cos(psi)},
                     {intensity, intensity, intensity}});
    }
  }
  return rig;
}

struct EvalReport {
  double psnr_normal = 0.0;
  double psnr_diffuse = 0.0;
  double psnr_roughness = 0.0;
  double psnr_specular = 0.0;
  double psnr_sss = 0.0;
  double psnr_displacement = 0.0;
  std::vector<double> relight;
  double material_mean = 0.0;
  double relighting_mean = 0.0;
  double total_mean = 0.0;
};

inline EvalReport eval_report(const MaterialMaps& pred, const MaterialMaps& gt,
                              const LightRig& heldout,
                              const CameraModel& cam = {}, int threads = 1) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw std::invalid_argument("eval_report: map dimensions do not align");
  }
  EvalReport r;
  const Image& mask = gt.mask;
  r.psnr_normal = psnr(pred.normal, gt.normal, mask);
  r.psnr_diffuse = psnr(pred.diffuse, gt.diffuse, mask);
  r.psnr_roughness = psnr(pred.roughness, gt.roughness, mask);
  r.psnr_specular = psnr(pred.specular, gt.specular, mask);
  r.psnr_sss = psnr(pred.sss, gt.sss, mask);
  r.psnr_displacement = psnr(pred.displacement, gt.displacement, mask);
  r.material_mean = (r.psnr_normal + r.psnr_diffuse + r.psnr_roughness +
                     r.psnr_specular + r.psnr_sss + r.psnr_displacement) /
                    6.0;
  for (const DirectionalLight& light : heldout) {
    LightRig one{light};
    Image rp = render_image(pred, one, cam, threads);
    Image rg = render_image(gt, one, cam, threads);
    r.relight.push_back(psnr(rp, rg, mask));
  }
  if (r.relight.empty()) {
    throw std::invalid_argument("eval_report: held-out rig is empty");
  }
  double sum = 0.0;
  for (double v : r.relight) sum += v;
  r.relighting_mean = sum / static_cast<double>(r.relight.size());
  r.total_mean = 0.5 * (r.material_mean + r.relighting_mean);
  return r;
}

inline void write_eval_csv(const std::string& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "psnr_normal,psnr_diffuse,psnr_roughness,psnr_specular,psnr_sss,"
         "psnr_displacement";
  for (std::size_t i = 0; i < r.relight.size(); ++i) {
    char col[32];
    std::snprintf(col, sizeof(col), ",relight_%02zu", i);
    out << col;
  }
  out << ",material_mean,relighting_mean,total_mean\n";
  char cell[48];
  auto put = [&](double v, bool lead_comma) {
    std::snprintf(cell, sizeof(cell), "%s%.6f", lead_comma ? "," : "", v);
    out << cell;
  };
  put(r.psnr_normal, false);
  put(r.psnr_diffuse, true);
  put(r.psnr_roughness, true);
  put(r.psnr_specular, true);
  put(r.psnr_sss, true);
  put(r.psnr_displacement, true);
  for (double v : r.relight) put(v, true);
  put(r.material_mean, true);
  put(r.relighting_mean, true);
  put(r.total_mean, true);
  out << "\n";
  if (!out) throw IoError("write failed: " + path);
}

// Tone-maps a linear radiance image through the sRGB transfer and writes an
// 8-bit PNG.
inline void write_png_preview(const std::string& path, const Image& img,
                              double exposure = 1.0) {
  if (img.channels() != 3)
    throw std::invalid_argument("write_png_preview: image must have 3 channels");
  if (!(exposure > 0.0))
    throw std::invalid_argument("write_png_preview: exposure must be positive");
  std::vector<std::uint8_t> rgb;
  rgb.reserve(img.pixel_count() * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        rgb.push_back(to_srgb8(img.at(x, y, c), exposure));
      }
    }
  }
  write_png_rgb8(path, rgb, img.width(), img.height());
}

}  // namespace pbrmat
