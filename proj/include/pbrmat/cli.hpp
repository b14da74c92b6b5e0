#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pbrmat/bundle.hpp"
#include "pbrmat/errors.hpp"
#include "pbrmat/estimator.hpp"
#include "pbrmat/gradients.hpp"
#include "pbrmat/lighting.hpp"
#include "pbrmat/material.hpp"
#include "pbrmat/metrics.hpp"
#include "pbrmat/pfm.hpp"
#include "pbrmat/scenegen.hpp"
#include "pbrmat/shader.hpp"

namespace pbrmat::cli {

namespace detail {

inline void parse_size(const std::string& s, int& w, int& h) {
  char extra;
  if (std::sscanf(s.c_str(), "%dx%d%c", &w, &h, &extra) != 2)
    throw std::invalid_argument("--size expects WxH, got '" + s + "'");
}

inline std::vector<MaterialCategory> parse_categories(const std::string& s) {
  std::vector<MaterialCategory> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    std::string name = s.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    std::optional<MaterialCategory> c = category_from_string(name);
    if (!c)
      throw std::invalid_argument(
          "unknown category '" + name + "' (Hair, Skin, Fabric, Leather)");
    out.push_back(*c);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline MaterialCategory parse_category(const std::string& s) {
  std::optional<MaterialCategory> c = category_from_string(s);
  if (!c)
    throw std::invalid_argument(
        "unknown category '" + s + "' (Hair, Skin, Fabric, Leather)");
  return *c;
}

inline LightRig parse_rig(const std::string& s, double intensity) {
  if (s == "fixed") return build_fixed_rig(intensity);
  if (s.rfind("random:", 0) == 0) {
    std::uint64_t seed = 0;
    char extra;
    if (std::sscanf(s.c_str() + 7, "%llu%c",
                    reinterpret_cast<unsigned long long*>(&seed), &extra) != 1)
      throw std::invalid_argument("--rig random:S expects an integer seed");
    return {sample_random_light(seed, 0)};
  }
  throw std::invalid_argument("--rig expects 'fixed' or 'random:S', got '" +
                              s + "'");
}

inline std::array<int, 4> parse_iters(const std::string& s) {
  std::array<int, 4> it{};
  char extra;
  if (std::sscanf(s.c_str(), "%d,%d,%d,%d%c", &it[0], &it[1], &it[2], &it[3],
                  &extra) != 4)
    throw std::invalid_argument("--iters expects four counts g,a,r,f");
  for (int v : it)
    if (v < 0) throw std::invalid_argument("--iters counts must be >= 0");
  return it;
}

inline Vec3d parse_tint(const std::string& s) {
  Vec3d t;
  char extra;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf%c", &t.x, &t.y, &t.z, &extra) != 3)
    throw std::invalid_argument("--tint expects r,g,b");
  return t;
}

struct GenArgs {
  std::uint64_t seed = 0;
  std::string size = "64x64";
  int regions = 6;
  std::string out;
  double noise = 0.0;
  int blur = 1;
  std::string categories;
};

inline void run_gen(const GenArgs& a, int threads) {
  SceneSpec spec;
  spec.seed = a.seed;
  parse_size(a.size, spec.width, spec.height);
  spec.num_regions = a.regions;
  spec.boundary_blur = a.blur;
  if (!a.categories.empty()) spec.categories = parse_categories(a.categories);
  Scene scene = generate_scene(spec);
  ObservationSet obs =
      render_observations(scene.maps, a.noise, spec.seed, {}, threads);
  save_bundle(a.out, scene.maps);
  save_labels(a.out, scene.labels);
  save_observations(a.out, obs);
  std::printf("gen: wrote %s (%dx%d, %d regions, %zu observations)\n",
              a.out.c_str(), spec.width, spec.height, spec.num_regions,
              obs.images.size());
}

struct RenderArgs {
  std::string maps;
  std::string rig = "fixed";
  double intensity = 5.0;
  std::string out;
  std::string png;
  double exposure = 1.0;
};

inline void run_render(const RenderArgs& a, int threads) {
  MaterialMaps maps = load_bundle(a.maps);
  LightRig rig = parse_rig(a.rig, a.intensity);
  Image img = render_image(maps, rig, {}, threads);
  write_pfm(a.out, img);
  if (!a.png.empty()) write_png_preview(a.png, img, a.exposure);
  std::printf("render: wrote %s (%dx%d, %zu lights)\n", a.out.c_str(),
              img.width(), img.height(), rig.size());
}

struct RelightArgs {
  std::string maps;
  std::string env;
  int lights = 16;
  std::string out;
  std::string png;
  double exposure = 1.0;
};

inline void run_relight(const RelightArgs& a, int threads) {
  MaterialMaps maps = load_bundle(a.maps);
  EnvironmentMap env = make_envmap(read_pfm(a.env));
  LightRig rig = envmap_to_lights(env, a.lights);
  Image img = render_image(maps, rig, {}, threads);
  write_pfm(a.out, img);
  if (!a.png.empty()) write_png_preview(a.png, img, a.exposure);
  std::printf("relight: wrote %s (%dx%d, %d lights)\n", a.out.c_str(),
              img.width(), img.height(), a.lights);
}

struct EstimateArgs {
  std::string obs;
  std::string mode = "progressive";
  std::uint64_t seed = 0;
  std::string iters = "300,300,300,200";
  double lr = 0.05;
  std::string out;
};

inline void run_estimate(const EstimateArgs& a, int threads) {
  ObservationSet obs = load_observations(a.obs);
  std::array<int, 4> it = parse_iters(a.iters);
  int budget = it[0] + it[1] + it[2] + it[3];
  EstimationResult result;
  if (a.mode == "progressive") {
    result = run_progressive(
        obs,
        default_schedule(LossMode::kObservationOnly, a.lr, it[0], it[1], it[2],
                         it[3]),
        {}, threads);
  } else if (a.mode == "joint") {
    result = run_joint_baseline(obs, budget, a.lr, {}, threads);
  } else {
    throw std::invalid_argument("--mode expects 'progressive' or 'joint'");
  }
  save_bundle(a.out, result.maps);
  write_traces_csv((std::filesystem::path(a.out) / "traces.csv").string(),
                   result.stages);
  for (const StageTrace& st : result.stages)
    std::fprintf(stderr, "estimate: %s stage, %zu steps, %.1fs\n",
                 to_string(st.stage), st.steps.size(), st.seconds);
  std::printf("estimate: wrote %s (mode %s, %d steps)\n", a.out.c_str(),
              a.mode.c_str(), budget);
}

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string out;
};

inline void run_eval(const EvalArgs& a, int threads) {
  MaterialMaps pred = load_bundle(a.pred);
  MaterialMaps gt = load_bundle(a.gt);
  EvalReport rep = eval_report(pred, gt, default_heldout_rig(), {}, threads);
  write_eval_csv(a.out, rep);
  std::printf(
      "eval: material_mean=%.4f relighting_mean=%.4f total_mean=%.4f -> %s\n",
      rep.material_mean, rep.relighting_mean, rep.total_mean, a.out.c_str());
}

struct EditArgs {
  std::string maps;
  std::string from;
  std::string to;
  std::string tint;
  std::string out;
};

inline void run_edit(const EditArgs& a, int threads) {
  (void)threads;
  MaterialMaps maps = load_bundle(a.maps);
  MaterialCategory from = parse_category(a.from);
  MaterialCategory to = parse_category(a.to);
  std::optional<Vec3d> tint;
  if (!a.tint.empty()) tint = parse_tint(a.tint);
  RegionLabels labels = classify_materials(maps);
  int edited = 0;
  for (float v : labels.idx.data())
    edited += v == static_cast<float>(static_cast<int>(from));
  MaterialMaps out = apply_category_edit(maps, labels, from, to, tint);
  save_bundle(a.out, out);
  std::printf("edit: %s -> %s on %d pixels, wrote %s\n", a.from.c_str(),
              a.to.c_str(), edited, a.out.c_str());
}

struct GradcheckArgs {
  int configs = 100;
  double h = 1e-4;
  std::uint64_t seed = 0;
};

inline int run_gradcheck(const GradcheckArgs& a) {
  if (a.configs < 1)
    throw std::invalid_argument("--configs must be >= 1");
  if (!(a.h > 0.0)) throw std::invalid_argument("--h must be positive");
  FdReport worst;
  for (int i = 0; i < a.configs; ++i) {
    GradcheckConfig cfg =
        make_gradcheck_config(a.seed, static_cast<std::uint64_t>(i));
    FdReport rep = finite_difference_check(cfg.params, cfg.rig, a.h);
    if (rep.max_rel_err > worst.max_rel_err) worst = rep;
  }
  std::printf(
      "gradcheck: max_rel_err=%.3e over %d configs (h=%g, param %d, channel "
      "%d)\n",
      worst.max_rel_err, a.configs, a.h, worst.worst_param,
      worst.worst_channel);
  return worst.max_rel_err > 1e-3 ? 1 : 0;
}

}  // namespace detail

// Parses argv (program name excluded) and runs one subcommand. Exit codes:
// 0 success, 1 validation or configuration error, 2 I/O error.
inline int dispatch(std::vector<std::string> args) {
  CLI::App app{"physically-based material toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 1;
  app.add_option("--threads", threads, "worker threads (never affects results)")
      ->check(CLI::Range(1, 256));

  detail::GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic scene");
  gen_cmd->add_option("--seed", gen.seed, "scene seed");
  gen_cmd->add_option("--size", gen.size, "image size WxH");
  gen_cmd->add_option("--regions", gen.regions, "number of material regions");
  gen_cmd->add_option("--out", gen.out, "output bundle directory")->required();
  gen_cmd->add_option("--noise", gen.noise, "observation noise sigma");
  gen_cmd->add_option("--blur", gen.blur, "region boundary blur radius");
  gen_cmd->add_option("--categories", gen.categories,
                      "comma list restricting categories");

  detail::RenderArgs render;
  CLI::App* render_cmd =
      app.add_subcommand("render", "render a bundle under a light rig");
  render_cmd->add_option("--maps", render.maps, "bundle directory")->required();
  render_cmd->add_option("--rig", render.rig, "'fixed' or 'random:S'");
  render_cmd->add_option("--intensity", render.intensity,
                         "fixed-rig light intensity");
  render_cmd->add_option("--out", render.out, "output PFM path")->required();
  render_cmd->add_option("--png", render.png, "also write an sRGB preview");
  render_cmd->add_option("--exposure", render.exposure, "preview exposure");

  detail::RelightArgs relight;
  CLI::App* relight_cmd =
      app.add_subcommand("relight", "render under an environment map");
  relight_cmd->add_option("--maps", relight.maps, "bundle directory")
      ->required();
  relight_cmd->add_option("--env", relight.env, "lat-long environment PFM")
      ->required();
  relight_cmd->add_option("--lights", relight.lights,
                          "directional lights to distill");
  relight_cmd->add_option("--out", relight.out, "output PFM path")->required();
  relight_cmd->add_option("--png", relight.png, "also write an sRGB preview");
  relight_cmd->add_option("--exposure", relight.exposure, "preview exposure");

  detail::EstimateArgs est;
  CLI::App* est_cmd =
      app.add_subcommand("estimate", "recover maps from observations");
  est_cmd->add_option("--obs", est.obs, "observation bundle directory")
      ->required();
  est_cmd->add_option("--mode", est.mode, "'progressive' or 'joint'");
  est_cmd->add_option("--seed", est.seed,
                      "stochastic-light seed (reserved; observation fitting "
                      "is deterministic)");
  est_cmd->add_option("--iters", est.iters, "stage iterations g,a,r,f");
  est_cmd->add_option("--lr", est.lr, "learning rate");
  est_cmd->add_option("--out", est.out, "output bundle directory")->required();

  detail::EvalArgs eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "score an estimate against ground truth");
  eval_cmd->add_option("--pred", eval.pred, "estimated bundle")->required();
  eval_cmd->add_option("--gt", eval.gt, "ground-truth bundle")->required();
  eval_cmd->add_option("--out", eval.out, "report CSV path")->required();

  detail::EditArgs edit;
  CLI::App* edit_cmd =
      app.add_subcommand("edit", "swap one material category for another");
  edit_cmd->add_option("--maps", edit.maps, "bundle directory")->required();
  edit_cmd->add_option("--from", edit.from, "category to replace")->required();
  edit_cmd->add_option("--to", edit.to, "replacement category")->required();
  edit_cmd->add_option("--tint", edit.tint, "diffuse tint r,g,b");
  edit_cmd->add_option("--out", edit.out, "output bundle directory")
      ->required();

  detail::GradcheckArgs grad;
  CLI::App* grad_cmd = app.add_subcommand(
      "gradcheck", "compare analytic shading gradients to finite differences");
  grad_cmd->set_help_flag("--help", "print help");  // frees --h below
  grad_cmd->add_option("--configs", grad.configs, "random configurations");
  grad_cmd->add_option("--h", grad.h, "finite-difference step");
  grad_cmd->add_option("--seed", grad.seed, "configuration seed");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
    if (gen_cmd->parsed()) detail::run_gen(gen, threads);
    if (render_cmd->parsed()) detail::run_render(render, threads);
    if (relight_cmd->parsed()) detail::run_relight(relight, threads);
    if (est_cmd->parsed()) detail::run_estimate(est, threads);
    if (eval_cmd->parsed()) detail::run_eval(eval, threads);
    if (edit_cmd->parsed()) detail::run_edit(edit, threads);
    if (grad_cmd->parsed()) return detail::run_gradcheck(grad);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace pbrmat::cli
