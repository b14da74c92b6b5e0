#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pbrmat/dual.hpp"
#include "pbrmat/gradients.hpp"
#include "pbrmat/lighting.hpp"
#include "pbrmat/losses.hpp"
#include "pbrmat/material.hpp"
#include "pbrmat/parallel.hpp"
#include "pbrmat/shader.hpp"

namespace pbrmat {

enum class LossMode {
  kTrainingLoss,      // reference maps available: pixel L1 + controlled render
  kObservationOnly,   // only the 36 fixed-light renders of the true scene
};

struct StageConfig {
  Stage stage = Stage::kFinetune;
  int iterations = 0;
  double learning_rate = 0.05;
  ControlPolicy policy;
  LossMode mode = LossMode::kObservationOnly;
  double w_pixel = 1.0;   // TrainingLoss term weights; ignored in
  double w_render = 1.0;  // ObservationOnly mode
};

inline StageConfig make_stage(Stage stage, int iterations, double learning_rate,
                              LossMode mode) {
  StageConfig cfg;
  cfg.stage = stage;
  cfg.iterations = iterations;
  cfg.learning_rate = learning_rate;
  cfg.policy = default_policy(stage);
  cfg.mode = mode;
  return cfg;
}

// Geometry/albedo/reflectance stages followed by a joint finetune. A zero
// count omits that stage.
inline std::vector<StageConfig> default_schedule(LossMode mode,
                                                 double learning_rate = 0.05,
                                                 int geometry = 300,
                                                 int albedo = 300, int rss = 300,
                                                 int finetune = 200) {
  std::vector<StageConfig> out;
  if (geometry > 0)
    out.push_back(make_stage(Stage::kGeometry, geometry, learning_rate, mode));
  if (albedo > 0)
    out.push_back(make_stage(Stage::kAlbedo, albedo, learning_rate, mode));
  if (rss > 0) out.push_back(make_stage(Stage::kRss, rss, learning_rate, mode));
  if (finetune > 0)
    out.push_back(make_stage(Stage::kFinetune, finetune, learning_rate, mode));
  return out;
}

struct StageTrace {
  Stage stage = Stage::kFinetune;
  LossMode mode = LossMode::kObservationOnly;
  std::vector<LossReport> steps;
  // Stage loss over the 36 fixed lights only (no stochastic light), evaluated
  // before the first update and after the last one.
  LossReport initial_eval;
  LossReport final_eval;
  double seconds = 0.0;
};

struct EstimationResult {
  MaterialMaps maps;
  std::vector<StageTrace> stages;
};

// Flat-gray starting point: flat normal, mid diffuse/roughness/displacement,
// low specular, no subsurface.
inline MaterialMaps init_estimate(const Image& mask) {
  if (mask.channels() != 1)
    throw std::invalid_argument("init_estimate: mask must be 1-channel");
  MaterialMaps m = make_maps(mask.width(), mask.height());
  m.mask = mask;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      float mk = mask.at(x, y, 0);
      if (mk == 0.0f) continue;
      if (mk != 1.0f)
        throw std::invalid_argument("init_estimate: mask must be binary");
      m.normal.at(x, y, 0) = 0.5f;
      m.normal.at(x, y, 1) = 0.5f;
      m.normal.at(x, y, 2) = 1.0f;
      m.diffuse.at(x, y, 0) = m.diffuse.at(x, y, 1) = m.diffuse.at(x, y, 2) = 0.5f;
      m.roughness.at(x, y, 0) = 0.5f;
      m.specular.at(x, y, 0) = 0.1f;
      m.sss.at(x, y, 0) = 0.0f;
      m.displacement.at(x, y, 0) = 0.5f;
    }
  }
  return m;
}

// Objective an ObservationOnly stage descends: render the maps with the
// policy's Fixed channels pinned, compare each fixed light's render to its
// observation, masked mean L1 summed over lights.
inline LossReport observation_loss(const MaterialMaps& maps,
                                   const ObservationSet& obs,
                                   const ControlPolicy& policy,
                                   const CameraModel& cam = {},
                                   int threads = 1) {
  validate_observations(obs);
  MaterialMaps composed = detail::compose_controlled(maps, maps, policy);
  LossReport rep;
  int n = 0;
  for (float v : maps.mask.data()) n += v == 1.0f;
  if (n == 0) throw std::invalid_argument("observation_loss: empty mask");
  rep.masked_pixels = n;
  for (std::size_t li = 0; li < obs.rig.size(); ++li) {
    LightRig single{obs.rig[li]};
    Image r = render_image(composed, single, cam, threads);
    double acc = 0.0;
    for (int y = 0; y < r.height(); ++y)
      for (int x = 0; x < r.width(); ++x) {
        if (maps.mask.at(x, y, 0) != 1.0f) continue;
        for (int c = 0; c < 3; ++c)
          acc += std::abs(static_cast<double>(r.at(x, y, c)) -
                          obs.images[li].at(x, y, c));
      }
    rep.render += acc / (static_cast<double>(n) * 3.0);
  }
  rep.total = rep.render;
  return rep;
}

namespace detail {

// Residuals at or below double-precision noise count as exact agreement, so a
// perfect fit has a zero subgradient and is a true fixed point of the update
// (Adam would otherwise rescale even 1e-15 residuals into full-size steps).
inline constexpr double kResidualDeadband = 1e-12;

inline double l1_sign(double d) {
  if (d > kResidualDeadband) return 1.0;
  if (d < -kResidualDeadband) return -1.0;
  return 0.0;
}

inline double float_quantized(double v) {
  return static_cast<double>(static_cast<float>(v));
}

// Dual lanes for the policy's optimized channels, in parameter order.
inline std::vector<int> policy_lanes(const ControlPolicy& p) {
  if (p.normal.source == ChannelSource::kFixed ||
      p.diffuse.source == ChannelSource::kFixed)
    throw std::invalid_argument(
        "control policy: Fixed is only supported for scalar channels");
  std::vector<int> lanes;
  if (p.normal.source == ChannelSource::kOptimized) {
    lanes.push_back(kParamNx);
    lanes.push_back(kParamNy);
  }
  if (p.displacement.source == ChannelSource::kOptimized)
    lanes.push_back(kParamDisp);
  if (p.diffuse.source == ChannelSource::kOptimized) {
    lanes.push_back(kParamDr);
    lanes.push_back(kParamDg);
    lanes.push_back(kParamDb);
  }
  if (p.roughness.source == ChannelSource::kOptimized)
    lanes.push_back(kParamRough);
  if (p.specular.source == ChannelSource::kOptimized)
    lanes.push_back(kParamSpec);
  if (p.sss.source == ChannelSource::kOptimized) lanes.push_back(kParamSss);
  if (lanes.empty())
    throw std::invalid_argument("control policy: no optimized channels");
  return lanes;
}

inline Vec3d decoded_normal(const MaterialMaps& m, int x, int y) {
  return normalize(Vec3d{m.normal.at(x, y, 0) * 2.0 - 1.0,
                         m.normal.at(x, y, 1) * 2.0 - 1.0,
                         m.normal.at(x, y, 2) * 2.0 - 1.0});
}

inline void check_fixed_rig(const LightRig& rig) {
  LightRig want = build_fixed_rig();
  if (rig.size() != want.size())
    throw std::invalid_argument(
        "observations must cover all 36 fixed-rig lights");
  for (std::size_t i = 0; i < rig.size(); ++i) {
    if (std::abs(rig[i].direction.x - want[i].direction.x) > 1e-9 ||
        std::abs(rig[i].direction.y - want[i].direction.y) > 1e-9 ||
        std::abs(rig[i].direction.z - want[i].direction.z) > 1e-9)
      throw std::invalid_argument(
          "observation rig does not match the fixed rig");
  }
}

// Stored-space targets for the pixel L1 term.
struct PixelTargets {
  double normal[3];
  double diffuse[3];
  double roughness, specular, sss, displacement;
};

template <int K>
inline void run_stage_k(MaterialMaps& maps, const MaterialMaps* reference,
                        const ObservationSet* obs, const StageConfig& cfg,
                        std::uint64_t rig_seed, int threads,
                        const std::vector<int>& lanes, StageTrace& trace) {
  const bool training = reference != nullptr;
  const ControlPolicy& pol = cfg.policy;
  const bool opt_normal = pol.normal.source == ChannelSource::kOptimized;
  const bool opt_diffuse = pol.diffuse.source == ChannelSource::kOptimized;
  const bool opt_rough = pol.roughness.source == ChannelSource::kOptimized;
  const bool opt_spec = pol.specular.source == ChannelSource::kOptimized;
  const bool opt_sss = pol.sss.source == ChannelSource::kOptimized;
  const bool opt_disp = pol.displacement.source == ChannelSource::kOptimized;

  std::vector<int> px, py;
  for (int y = 0; y < maps.height(); ++y)
    for (int x = 0; x < maps.width(); ++x)
      if (maps.mask.at(x, y, 0) == 1.0f) {
        px.push_back(x);
        py.push_back(y);
      }
  const std::size_t n = px.size();
  if (n == 0)
    throw std::invalid_argument("optimize_stage: mask selects no pixels");

  // The source for channels the policy reads instead of optimizing: the
  // reference maps when fitting to a reference, the stage-start estimate
  // when fitting to observations.
  const MaterialMaps& refsrc = training ? *reference : maps;
  auto scalar_held = [&](const ChannelControl& ctl, const Image& img, int x,
                         int y) {
    return ctl.source == ChannelSource::kFixed
               ? float_quantized(ctl.fixed_value)
               : static_cast<double>(img.at(x, y, 0));
  };

  std::vector<SurfaceState<double>> held(n);
  for (std::size_t i = 0; i < n; ++i) {
    int x = px[i], y = py[i];
    SurfaceState<double>& hv = held[i];
    hv.normal = opt_normal ? Vec3d{0.0, 0.0, 1.0} : decoded_normal(refsrc, x, y);
    hv.diffuse = opt_diffuse ? Vec3d{0.0, 0.0, 0.0}
                             : Vec3d{refsrc.diffuse.at(x, y, 0),
                                     refsrc.diffuse.at(x, y, 1),
                                     refsrc.diffuse.at(x, y, 2)};
    hv.roughness = opt_rough ? 0.0 : scalar_held(pol.roughness, refsrc.roughness, x, y);
    hv.specular = opt_spec ? 0.0 : scalar_held(pol.specular, refsrc.specular, x, y);
    hv.sss = opt_sss ? 0.0 : scalar_held(pol.sss, refsrc.sss, x, y);
  }

  std::vector<PixelParams> params(n);
  for (std::size_t i = 0; i < n; ++i)
    params[i] = encode_pixel(maps, px[i], py[i]);
  std::vector<double> m_state(n * K, 0.0), v_state(n * K, 0.0);

  // Each pixel's best iterate under the deterministic part of its objective
  // (the stochastic light excluded). The stage writes back the best iterate
  // rather than the last one: the scale-normalized updates oscillate instead
  // of settling, so the last iterate offers no endpoint guarantee. A pixel
  // must beat its starting score by a margin well above float-quantization
  // noise or it keeps its input bits.
  std::vector<PixelParams> best(params);
  std::vector<double> best_score(n, std::numeric_limits<double>::infinity());
  std::vector<double> start_score(n, 0.0);
  const double accept_margin = 1e-3 / static_cast<double>(n);

  const LightRig fixed36 = build_fixed_rig();

  // TrainingLoss targets: stored-space reference values for the L1 term, and
  // the controlled reference side of the render comparison (reference maps
  // with the policy's Fixed channels pinned), cached per fixed light.
  std::vector<PixelTargets> targets;
  std::vector<SurfaceState<double>> refmix;
  std::vector<double> refmix_rad;
  if (training) {
    targets.resize(n);
    refmix.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      int x = px[i], y = py[i];
      // Optimized channels target the reference as seen through the stage's
      // own parametrization. Stored normals are float-quantized (not exactly
      // unit) and stored scalars can sit outside the squash clamp, so raw
      // targets would leave irreducible residuals at a bit-identical fit and
      // the moment rescaling would turn them into full-size steps.
      DecodedPixel<double> refdec =
          decode_pixel(encode_pixel(*reference, x, y).t);
      PixelTargets& t = targets[i];
      t.normal[0] = (refdec.surface.normal.x + 1.0) * 0.5;
      t.normal[1] = (refdec.surface.normal.y + 1.0) * 0.5;
      t.normal[2] = (refdec.surface.normal.z + 1.0) * 0.5;
      t.diffuse[0] = refdec.surface.diffuse.x;
      t.diffuse[1] = refdec.surface.diffuse.y;
      t.diffuse[2] = refdec.surface.diffuse.z;
      t.roughness = refdec.surface.roughness;
      t.specular = refdec.surface.specular;
      t.sss = refdec.surface.sss;
      t.displacement = refdec.displacement;

      SurfaceState<double>& rv = refmix[i];
      rv.normal =
          opt_normal ? refdec.surface.normal : decoded_normal(*reference, x, y);
      rv.diffuse = opt_diffuse ? refdec.surface.diffuse
                               : Vec3d{reference->diffuse.at(x, y, 0),
                                       reference->diffuse.at(x, y, 1),
                                       reference->diffuse.at(x, y, 2)};
      rv.roughness =
          pol.roughness.source == ChannelSource::kFixed
              ? float_quantized(pol.roughness.fixed_value)
              : (opt_rough ? refdec.surface.roughness
                           : static_cast<double>(
                                 reference->roughness.at(x, y, 0)));
      rv.specular =
          pol.specular.source == ChannelSource::kFixed
              ? float_quantized(pol.specular.fixed_value)
              : (opt_spec ? refdec.surface.specular
                          : static_cast<double>(
                                reference->specular.at(x, y, 0)));
      rv.sss = pol.sss.source == ChannelSource::kFixed
                   ? float_quantized(pol.sss.fixed_value)
                   : (opt_sss ? refdec.surface.sss
                              : static_cast<double>(reference->sss.at(x, y, 0)));
    }
    refmix_rad.assign(n * fixed36.size() * 3, 0.0);
    parallel_for(static_cast<std::int64_t>(n), threads, [&](std::int64_t i) {
      for (std::size_t li = 0; li < fixed36.size(); ++li) {
        std::array<double, 3> rad = shade_one_light(refmix[i], fixed36[li]);
        for (int c = 0; c < 3; ++c)
          refmix_rad[(i * fixed36.size() + li) * 3 + c] = rad[c];
      }
    });
  }

  const int opt_channel_count = static_cast<int>(opt_normal) + opt_diffuse +
                                opt_rough + opt_spec + opt_sss + opt_disp;
  auto l1_scale = [&](int comps) {
    return 1.0 / (static_cast<double>(opt_channel_count) * n * comps);
  };
  const double s_normal = opt_normal ? l1_scale(3) : 0.0;
  const double s_diffuse = opt_diffuse ? l1_scale(3) : 0.0;
  const double s_rough = opt_rough ? l1_scale(1) : 0.0;
  const double s_spec = opt_spec ? l1_scale(1) : 0.0;
  const double s_sss = opt_sss ? l1_scale(1) : 0.0;
  const double s_disp = opt_disp ? l1_scale(1) : 0.0;
  const double inv3n = 1.0 / (3.0 * n);
  const double w_pixel = training ? cfg.w_pixel : 0.0;
  const double w_render = training ? cfg.w_render : 1.0;

  std::vector<double> pixel_part(n, 0.0), render_part(n, 0.0);
  const std::size_t n_obs_lights = training ? 0 : obs->rig.size();

  double beta1_t = 1.0, beta2_t = 1.0;
  for (int step = 0; step < cfg.iterations; ++step) {
    beta1_t *= 0.9;
    beta2_t *= 0.999;
    const double bias1 = 1.0 - beta1_t;
    const double bias2 = 1.0 - beta2_t;
    const DirectionalLight stochastic =
        training ? sample_random_light(rig_seed, static_cast<std::uint64_t>(step))
                 : DirectionalLight{};

    parallel_for(static_cast<std::int64_t>(n), threads, [&](std::int64_t i) {
      std::array<Dual<K>, kNumParams> tt;
      for (int j = 0; j < kNumParams; ++j) tt[j] = Dual<K>(params[i].t[j]);
      for (int l = 0; l < K; ++l) tt[lanes[l]].d[l] = 1.0;
      DecodedPixel<Dual<K>> dec = decode_pixel(tt);

      const SurfaceState<double>& hv = held[i];
      SurfaceState<Dual<K>> s;
      s.normal = opt_normal
                     ? dec.surface.normal
                     : Vec3<Dual<K>>{Dual<K>(hv.normal.x), Dual<K>(hv.normal.y),
                                     Dual<K>(hv.normal.z)};
      s.diffuse = opt_diffuse ? dec.surface.diffuse
                              : Vec3<Dual<K>>{Dual<K>(hv.diffuse.x),
                                              Dual<K>(hv.diffuse.y),
                                              Dual<K>(hv.diffuse.z)};
      s.roughness = opt_rough ? dec.surface.roughness : Dual<K>(hv.roughness);
      s.specular = opt_spec ? dec.surface.specular : Dual<K>(hv.specular);
      s.sss = opt_sss ? dec.surface.sss : Dual<K>(hv.sss);

      std::array<double, K> g{};
      double lp = 0.0, rp = 0.0;

      auto acc_l1 = [&](const Dual<K>& pred, double tgt, double scale) {
        double d = pred.v - tgt;
        lp += scale * std::abs(d);
        double sg = l1_sign(d);
        if (sg != 0.0) {
          double f = w_pixel * scale * sg;
          for (int l = 0; l < K; ++l) g[l] += f * pred.d[l];
        }
      };
      auto acc_render = [&](const std::array<Dual<K>, 3>& rad,
                            const double* tgt) {
        for (int c = 0; c < 3; ++c) {
          double d = rad[c].v - tgt[c];
          rp += inv3n * std::abs(d);
          double sg = l1_sign(d);
          if (sg != 0.0) {
            double f = w_render * inv3n * sg;
            for (int l = 0; l < K; ++l) g[l] += f * rad[c].d[l];
          }
        }
      };

      double det = 0.0;
      if (training) {
        const PixelTargets& t = targets[i];
        if (opt_normal) {
          acc_l1((dec.surface.normal.x + 1.0) * 0.5, t.normal[0], s_normal);
          acc_l1((dec.surface.normal.y + 1.0) * 0.5, t.normal[1], s_normal);
          acc_l1((dec.surface.normal.z + 1.0) * 0.5, t.normal[2], s_normal);
        }
        if (opt_diffuse) {
          acc_l1(dec.surface.diffuse.x, t.diffuse[0], s_diffuse);
          acc_l1(dec.surface.diffuse.y, t.diffuse[1], s_diffuse);
          acc_l1(dec.surface.diffuse.z, t.diffuse[2], s_diffuse);
        }
        if (opt_rough) acc_l1(dec.surface.roughness, t.roughness, s_rough);
        if (opt_spec) acc_l1(dec.surface.specular, t.specular, s_spec);
        if (opt_sss) acc_l1(dec.surface.sss, t.sss, s_sss);
        if (opt_disp) acc_l1(dec.displacement, t.displacement, s_disp);

        for (std::size_t li = 0; li < fixed36.size(); ++li) {
          std::array<Dual<K>, 3> rad = shade_one_light(s, fixed36[li]);
          acc_render(rad, &refmix_rad[(i * fixed36.size() + li) * 3]);
        }
        det = w_pixel * lp + w_render * rp;
        std::array<Dual<K>, 3> rad = shade_one_light(s, stochastic);
        std::array<double, 3> ref_rad = shade_one_light(refmix[i], stochastic);
        acc_render(rad, ref_rad.data());
      } else {
        int x = px[i], y = py[i];
        for (std::size_t li = 0; li < n_obs_lights; ++li) {
          std::array<Dual<K>, 3> rad = shade_one_light(s, obs->rig[li]);
          double tgt[3] = {obs->images[li].at(x, y, 0),
                           obs->images[li].at(x, y, 1),
                           obs->images[li].at(x, y, 2)};
          acc_render(rad, tgt);
        }
        det = rp;
      }

      if (step == 0) start_score[i] = det;
      if (det < best_score[i]) {
        best_score[i] = det;
        best[i] = params[i];
      }

      for (int l = 0; l < K; ++l) {
        double& m1 = m_state[i * K + l];
        double& m2 = v_state[i * K + l];
        m1 = 0.9 * m1 + 0.1 * g[l];
        m2 = 0.999 * m2 + 0.001 * g[l] * g[l];
        double mhat = m1 / bias1;
        double vhat = m2 / bias2;
        params[i].t[lanes[l]] -=
            cfg.learning_rate * mhat / (std::sqrt(vhat) + 1e-8);
      }
      pixel_part[i] = lp;
      render_part[i] = rp;
    });

    LossReport rep;
    rep.masked_pixels = static_cast<int>(n);
    double rterm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      rep.pixel += pixel_part[i];
      rterm += render_part[i];
    }
    if (training && cfg.stage != Stage::kFinetune)
      rep.cpr = rterm;
    else
      rep.render = rterm;
    rep.total = training ? cfg.w_pixel * rep.pixel + cfg.w_render * rterm
                         : rterm;
    trace.steps.push_back(rep);
  }

  // Write back only the optimized channels, and only for pixels whose best
  // iterate beat the start: everything else keeps its input bits, so a
  // zero-rate or zero-step stage is an exact no-op even where encoding would
  // clamp, and the stage's endpoint loss can never rise above its entry loss.
  for (std::size_t i = 0; i < n; ++i) {
    if (!(best_score[i] + accept_margin < start_score[i])) continue;
    int x = px[i], y = py[i];
    DecodedPixel<double> dec = decode_pixel(best[i].t);
    if (opt_normal) {
      maps.normal.at(x, y, 0) = static_cast<float>((dec.surface.normal.x + 1.0) * 0.5);
      maps.normal.at(x, y, 1) = static_cast<float>((dec.surface.normal.y + 1.0) * 0.5);
      maps.normal.at(x, y, 2) = static_cast<float>((dec.surface.normal.z + 1.0) * 0.5);
    }
    if (opt_diffuse) {
      maps.diffuse.at(x, y, 0) = static_cast<float>(dec.surface.diffuse.x);
      maps.diffuse.at(x, y, 1) = static_cast<float>(dec.surface.diffuse.y);
      maps.diffuse.at(x, y, 2) = static_cast<float>(dec.surface.diffuse.z);
    }
    if (opt_rough)
      maps.roughness.at(x, y, 0) = static_cast<float>(dec.surface.roughness);
    if (opt_spec)
      maps.specular.at(x, y, 0) = static_cast<float>(dec.surface.specular);
    if (opt_sss) maps.sss.at(x, y, 0) = static_cast<float>(dec.surface.sss);
    if (opt_disp)
      maps.displacement.at(x, y, 0) = static_cast<float>(dec.displacement);
  }
}

inline void run_stage(MaterialMaps& maps, const MaterialMaps* reference,
                      const ObservationSet* obs, const StageConfig& cfg,
                      std::uint64_t rig_seed, int threads, StageTrace& trace) {
  std::vector<int> lanes = policy_lanes(cfg.policy);
  switch (lanes.size()) {
    case 1: run_stage_k<1>(maps, reference, obs, cfg, rig_seed, threads, lanes, trace); break;
    case 2: run_stage_k<2>(maps, reference, obs, cfg, rig_seed, threads, lanes, trace); break;
    case 3: run_stage_k<3>(maps, reference, obs, cfg, rig_seed, threads, lanes, trace); break;
    case 4: run_stage_k<4>(maps, reference, obs, cfg, rig_seed, threads, lanes, trace); break;
    case 5: run_stage_k<5>(maps, reference, obs, cfg, rig_seed, threads, lanes, trace); break;
    case 6: run_stage_k<6>(maps, reference, obs, cfg, rig_seed, threads, lanes, trace); break;
    case 7: run_stage_k<7>(maps, reference, obs, cfg, rig_seed, threads, lanes, trace); break;
    case 8: run_stage_k<8>(maps, reference, obs, cfg, rig_seed, threads, lanes, trace); break;
    case 9: run_stage_k<9>(maps, reference, obs, cfg, rig_seed, threads, lanes, trace); break;
    default:
      throw std::logic_error("unreachable lane count");
  }
}

inline void check_stage_config(const StageConfig& cfg, LossMode expected) {
  if (cfg.mode != expected)
    throw std::invalid_argument("stage config mode does not match the inputs");
  if (cfg.iterations < 0)
    throw std::invalid_argument("stage iterations must be >= 0");
  if (cfg.learning_rate < 0.0)
    throw std::invalid_argument("learning rate must be >= 0");
  if (cfg.policy.stage != cfg.stage)
    throw std::invalid_argument("policy was built for a different stage");
}

}  // namespace detail

// Fits the stage's optimized channels to the reference maps by per-pixel
// adaptive-moment descent on the stage objective (pixel L1 + controlled
// render loss under the 36 fixed lights plus the step's stochastic light).
// Each pixel keeps its best iterate under the deterministic 36-light
// objective, so final_eval never exceeds initial_eval.
inline StageTrace optimize_stage(MaterialMaps& maps,
                                 const MaterialMaps& reference,
                                 const StageConfig& cfg, std::uint64_t rig_seed,
                                 const CameraModel& cam = {}, int threads = 1) {
  detail::check_stage_config(cfg, LossMode::kTrainingLoss);
  auto start = std::chrono::steady_clock::now();
  StageTrace trace;
  trace.stage = cfg.stage;
  trace.mode = cfg.mode;
  LightRig fixed36 = build_fixed_rig();
  trace.initial_eval = total_stage_loss(maps, reference, cfg.policy, fixed36,
                                        cam, cfg.w_pixel, cfg.w_render, threads);
  detail::run_stage(maps, &reference, nullptr, cfg, rig_seed, threads, trace);
  trace.final_eval = total_stage_loss(maps, reference, cfg.policy, fixed36,
                                      cam, cfg.w_pixel, cfg.w_render, threads);
  trace.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
  return trace;
}

// Same descent against captured observations: the only loss is the masked L1
// between the policy-composed render and each fixed light's observation.
inline StageTrace optimize_stage(MaterialMaps& maps, const ObservationSet& obs,
                                 const StageConfig& cfg,
                                 const CameraModel& cam = {}, int threads = 1) {
  detail::check_stage_config(cfg, LossMode::kObservationOnly);
  validate_observations(obs);
  detail::check_fixed_rig(obs.rig);
  if (!bits_equal(obs.mask, maps.mask))
    throw std::invalid_argument("observation mask differs from the maps' mask");
  auto start = std::chrono::steady_clock::now();
  StageTrace trace;
  trace.stage = cfg.stage;
  trace.mode = cfg.mode;
  trace.initial_eval = observation_loss(maps, obs, cfg.policy, cam, threads);
  detail::run_stage(maps, nullptr, &obs, cfg, 0, threads, trace);
  trace.final_eval = observation_loss(maps, obs, cfg.policy, cam, threads);
  trace.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
  return trace;
}

namespace detail {

inline void check_schedule(const std::vector<StageConfig>& schedule,
                           LossMode expected) {
  if (schedule.empty())
    throw std::invalid_argument("schedule must contain at least one stage");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i].mode != expected)
      throw std::invalid_argument("schedule mode does not match the inputs");
    if (i > 0 && static_cast<int>(schedule[i].stage) <=
                     static_cast<int>(schedule[i - 1].stage))
      throw std::invalid_argument(
          "schedule stages must follow geometry, albedo, rss, finetune order");
  }
}

}  // namespace detail

// Staged estimation from observations, starting at init_estimate. Later
// stages read their non-optimized channels from the running estimate, so
// geometry's output feeds albedo, and so on.
inline EstimationResult run_progressive(const ObservationSet& obs,
                                        const std::vector<StageConfig>& schedule,
                                        const CameraModel& cam = {},
                                        int threads = 1) {
  detail::check_schedule(schedule, LossMode::kObservationOnly);
  validate_observations(obs);
  EstimationResult res;
  res.maps = init_estimate(obs.mask);
  for (const StageConfig& cfg : schedule)
    res.stages.push_back(optimize_stage(res.maps, obs, cfg, cam, threads));
  return res;
}

// Staged fit toward known reference maps (the training-time objective).
inline EstimationResult run_progressive(const MaterialMaps& reference,
                                        const std::vector<StageConfig>& schedule,
                                        std::uint64_t rig_seed,
                                        const CameraModel& cam = {},
                                        int threads = 1) {
  detail::check_schedule(schedule, LossMode::kTrainingLoss);
  EstimationResult res;
  res.maps = init_estimate(reference.mask);
  for (const StageConfig& cfg : schedule)
    res.stages.push_back(
        optimize_stage(res.maps, reference, cfg, rig_seed, cam, threads));
  return res;
}

// Non-progressive contrast: one finetune-style stage optimizing all channels
// at once from the flat start. Give it the progressive schedule's summed
// iteration count for a budget-matched comparison.
inline EstimationResult run_joint_baseline(const ObservationSet& obs,
                                           int iterations,
                                           double learning_rate = 0.05,
                                           const CameraModel& cam = {},
                                           int threads = 1) {
  if (iterations == 0) {
    validate_observations(obs);
    EstimationResult res;
    res.maps = init_estimate(obs.mask);
    return res;
  }
  return run_progressive(
      obs,
      {make_stage(Stage::kFinetune, iterations, learning_rate,
                  LossMode::kObservationOnly)},
      cam, threads);
}

}  // namespace pbrmat
