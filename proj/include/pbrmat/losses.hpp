#pragma once

#include <cmath>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbrmat/lighting.hpp"
#include "pbrmat/material.hpp"
#include "pbrmat/shader.hpp"

namespace pbrmat {

enum class Stage : int { kGeometry = 0, kAlbedo = 1, kRss = 2, kFinetune = 3 };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::kGeometry: return "geometry";
    case Stage::kAlbedo: return "albedo";
    case Stage::kRss: return "rss";
    case Stage::kFinetune: return "finetune";
  }
  return "?";
}

enum class ChannelSource { kOptimized, kFixed, kReference };

enum class MapChannel : int {
  kNormal = 0,
  kDiffuse,
  kRoughness,
  kSpecular,
  kSss,
  kDisplacement,
};

inline constexpr MapChannel kAllChannels[] = {
    MapChannel::kNormal,   MapChannel::kDiffuse, MapChannel::kRoughness,
    MapChannel::kSpecular, MapChannel::kSss,     MapChannel::kDisplacement,
};

struct ChannelControl {
  ChannelSource source = ChannelSource::kOptimized;
  double fixed_value = 0.0;  // meaningful only for kFixed on scalar channels
};

// Which channels a stage optimizes and what stands in for the rest while
// rendering: a pinned constant (Fixed) or the reference value (Reference).
struct ControlPolicy {
  Stage stage = Stage::kFinetune;
  ChannelControl normal;
  ChannelControl diffuse;
  ChannelControl roughness;
  ChannelControl specular;
  ChannelControl sss;
  ChannelControl displacement;

  const ChannelControl& channel(MapChannel c) const {
    switch (c) {
      case MapChannel::kNormal: return normal;
      case MapChannel::kDiffuse: return diffuse;
      case MapChannel::kRoughness: return roughness;
      case MapChannel::kSpecular: return specular;
      case MapChannel::kSss: return sss;
      case MapChannel::kDisplacement: return displacement;
    }
    throw std::invalid_argument("unknown channel");
  }
};

inline ControlPolicy default_policy(Stage s) {
  ChannelControl opt{ChannelSource::kOptimized, 0.0};
  ChannelControl ref{ChannelSource::kReference, 0.0};
  auto fix = [](double v) { return ChannelControl{ChannelSource::kFixed, v}; };
  ControlPolicy p;
  p.stage = s;
  switch (s) {
    case Stage::kGeometry:
      p.normal = opt;
      p.displacement = opt;
      p.roughness = fix(0.2);
      p.specular = fix(0.5);
      p.diffuse = ref;
      p.sss = ref;
      break;
    case Stage::kAlbedo:
      p.diffuse = opt;
      p.roughness = fix(0.8);
      p.specular = fix(0.03);
      p.normal = ref;
      p.sss = ref;
      p.displacement = ref;
      break;
    case Stage::kRss:
      p.roughness = opt;
      p.specular = opt;
      p.sss = opt;
      p.normal = ref;
      p.displacement = ref;
      p.diffuse = ref;
      break;
    case Stage::kFinetune:
      p.normal = p.diffuse = p.roughness = p.specular = p.sss =
          p.displacement = opt;
      break;
  }
  return p;
}

inline std::vector<MapChannel> optimized_channels(const ControlPolicy& p) {
  std::vector<MapChannel> out;
  for (MapChannel c : kAllChannels)
    if (p.channel(c).source == ChannelSource::kOptimized) out.push_back(c);
  return out;
}

struct LossReport {
  double pixel = 0.0;   // map-space L1 term
  double render = 0.0;  // plain multi-illumination render term
  double cpr = 0.0;     // controlled render term
  double total = 0.0;
  int masked_pixels = 0;
};

inline const Image& channel_image(const MaterialMaps& m, MapChannel c) {
  switch (c) {
    case MapChannel::kNormal: return m.normal;
    case MapChannel::kDiffuse: return m.diffuse;
    case MapChannel::kRoughness: return m.roughness;
    case MapChannel::kSpecular: return m.specular;
    case MapChannel::kSss: return m.sss;
    case MapChannel::kDisplacement: return m.displacement;
  }
  throw std::invalid_argument("unknown channel");
}

inline Image& channel_image(MaterialMaps& m, MapChannel c) {
  return const_cast<Image&>(channel_image(static_cast<const MaterialMaps&>(m), c));
}

namespace detail {
inline int check_aligned(const MaterialMaps& a, const MaterialMaps& b) {
  if (!a.mask.same_shape(b.mask) || !a.normal.same_shape(b.normal) ||
      !a.diffuse.same_shape(b.diffuse))
    throw std::invalid_argument("loss: map dimensions differ");
  if (!bits_equal(a.mask, b.mask))
    throw std::invalid_argument("loss: masks differ");
  int n = 0;
  for (float v : a.mask.data()) n += v == 1.0f;
  if (n == 0) throw std::invalid_argument("loss: empty mask");
  return n;
}
}  // namespace detail

// Mean absolute difference per channel (over masked pixels and components,
// normals compared in encoded space), averaged across the requested channels.
inline double l1_map_loss(const MaterialMaps& pred, const MaterialMaps& ref,
                          const std::vector<MapChannel>& channels) {
  if (channels.empty())
    throw std::invalid_argument("l1_map_loss: no channels requested");
  int n = detail::check_aligned(pred, ref);
  int w = pred.width(), h = pred.height();
  double sum_means = 0.0;
  for (MapChannel c : channels) {
    const Image& a = channel_image(pred, c);
    const Image& b = channel_image(ref, c);
    double acc = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (pred.mask.at(x, y, 0) != 1.0f) continue;
        for (int k = 0; k < a.channels(); ++k)
          acc += std::abs(static_cast<double>(a.at(x, y, k)) - b.at(x, y, k));
      }
    sum_means += acc / (static_cast<double>(n) * a.channels());
  }
  return sum_means / static_cast<double>(channels.size());
}

// Sum over lights of the masked mean |pred - ref| between the two renders
// under that light alone. Per-light sums run in pixel-index order and lights
// accumulate in rig order, so the value is reproducible bit-for-bit.
inline double multi_illum_render_loss(const MaterialMaps& pred,
                                      const MaterialMaps& ref,
                                      const LightRig& rig,
                                      const CameraModel& cam = {},
                                      int threads = 1) {
  int n = detail::check_aligned(pred, ref);
  if (rig.empty())
    throw std::invalid_argument("multi_illum_render_loss: empty light rig");
  double loss = 0.0;
  for (const DirectionalLight& light : rig) {
    LightRig single{light};
    Image a = render_image(pred, single, cam, threads);
    Image b = render_image(ref, single, cam, threads);
    double acc = 0.0;
    int w = pred.width(), h = pred.height();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (pred.mask.at(x, y, 0) != 1.0f) continue;
        for (int k = 0; k < 3; ++k)
          acc += std::abs(static_cast<double>(a.at(x, y, k)) - b.at(x, y, k));
      }
    loss += acc / (static_cast<double>(n) * 3.0);
  }
  return loss;
}

namespace detail {
// Side of a controlled comparison: Fixed and Reference channels are pinned
// identically on both sides; Optimized channels come from `optimized_src`.
inline MaterialMaps compose_controlled(const MaterialMaps& optimized_src,
                                       const MaterialMaps& ref,
                                       const ControlPolicy& policy) {
  MaterialMaps out = ref;
  for (MapChannel c : kAllChannels) {
    const ChannelControl& ctl = policy.channel(c);
    switch (ctl.source) {
      case ChannelSource::kReference:
        break;  // already ref's channel
      case ChannelSource::kOptimized:
        channel_image(out, c) = channel_image(optimized_src, c);
        break;
      case ChannelSource::kFixed: {
        if (c == MapChannel::kNormal || c == MapChannel::kDiffuse)
          throw std::invalid_argument(
              "control policy: Fixed is only supported for scalar channels");
        Image& img = channel_image(out, c);
        for (int y = 0; y < out.height(); ++y)
          for (int x = 0; x < out.width(); ++x)
            if (out.mask.at(x, y, 0) == 1.0f)
              img.at(x, y, 0) = static_cast<float>(ctl.fixed_value);
        break;
      }
    }
  }
  return out;
}
}  // namespace detail

// Controlled render comparison: both sides share the policy's Fixed and
// Reference channels, so only the Optimized channels can move the loss.
inline double cpr_loss(const MaterialMaps& pred, const MaterialMaps& ref,
                       const ControlPolicy& policy, const LightRig& rig,
                       const CameraModel& cam = {}, int threads = 1) {
  if (policy.stage == Stage::kFinetune)
    throw std::invalid_argument(
        "cpr_loss: the finetune stage compares full renders instead");
  detail::check_aligned(pred, ref);
  MaterialMaps side_pred = detail::compose_controlled(pred, ref, policy);
  MaterialMaps side_ref = detail::compose_controlled(ref, ref, policy);
  return multi_illum_render_loss(side_pred, side_ref, rig, cam, threads);
}

// Captured appearance a fitter works against: one radiance image per rig
// light, plus the pixel mask they share.
struct ObservationSet {
  std::vector<Image> images;
  LightRig rig;
  Image mask;
};

inline void validate_observations(const ObservationSet& obs) {
  if (obs.images.empty() || obs.images.size() != obs.rig.size())
    throw std::invalid_argument(
        "observations: need exactly one image per rig light");
  if (obs.mask.channels() != 1)
    throw std::invalid_argument("observations: mask must be 1-channel");
  for (const Image& img : obs.images) {
    if (img.channels() != 3 || img.width() != obs.mask.width() ||
        img.height() != obs.mask.height())
      throw std::invalid_argument("observations: image/mask shape mismatch");
  }
  for (float v : obs.mask.data())
    if (v != 0.0f && v != 1.0f)
      throw std::invalid_argument("observations: mask must be binary");
}

// Stage objective: weighted pixel L1 on the stage's own channels plus the
// stage's render term (controlled for geometry/albedo/rss, plain for
// finetune over all channels).
inline LossReport total_stage_loss(const MaterialMaps& pred,
                                   const MaterialMaps& ref,
                                   const ControlPolicy& policy,
                                   const LightRig& rig,
                                   const CameraModel& cam = {},
                                   double w_pixel = 1.0, double w_render = 1.0,
                                   int threads = 1) {
  LossReport rep;
  rep.masked_pixels = detail::check_aligned(pred, ref);
  if (policy.stage == Stage::kFinetune) {
    rep.pixel = l1_map_loss(
        pred, ref,
        std::vector<MapChannel>(std::begin(kAllChannels), std::end(kAllChannels)));
    rep.render = multi_illum_render_loss(pred, ref, rig, cam, threads);
    rep.total = w_pixel * rep.pixel + w_render * rep.render;
  } else {
    rep.pixel = l1_map_loss(pred, ref, optimized_channels(policy));
    rep.cpr = cpr_loss(pred, ref, policy, rig, cam, threads);
    rep.total = w_pixel * rep.pixel + w_render * rep.cpr;
  }
  return rep;
}

}  // namespace pbrmat
