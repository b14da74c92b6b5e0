#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pbrmat/estimator.hpp"
#include "pbrmat/scenegen.hpp"
#include "pbrmat/shader.hpp"
#include "test_util.hpp"

using namespace pbrmat;
using testutil::flat_maps;
using testutil::maps_bits_equal;
using testutil::varied_maps;

namespace {

Scene small_scene(std::uint64_t seed) {
  SceneSpec spec;
  spec.seed = seed;
  spec.width = 16;
  spec.height = 16;
  spec.num_regions = 3;
  return generate_scene(spec);
}

}  // namespace

TEST_CASE("default schedule lists the four stages in order", "[estimator]") {
  auto sched = default_schedule(LossMode::kObservationOnly);
  REQUIRE(sched.size() == 4);
  CHECK(sched[0].stage == Stage::kGeometry);
  CHECK(sched[0].iterations == 300);
  CHECK(sched[1].stage == Stage::kAlbedo);
  CHECK(sched[2].stage == Stage::kRss);
  CHECK(sched[3].stage == Stage::kFinetune);
  CHECK(sched[3].iterations == 200);
  for (const StageConfig& c : sched) {
    CHECK(c.learning_rate == 0.05);
    CHECK(c.mode == LossMode::kObservationOnly);
    CHECK(c.policy.stage == c.stage);
  }

  auto partial = default_schedule(LossMode::kTrainingLoss, 0.02, 10, 0, 5, 0);
  REQUIRE(partial.size() == 2);
  CHECK(partial[0].stage == Stage::kGeometry);
  CHECK(partial[1].stage == Stage::kRss);
  CHECK(partial[1].learning_rate == 0.02);
}

TEST_CASE("init estimate is the documented flat start", "[estimator]") {
  Image mask(5, 4, 1, 0.0f);
  for (int y = 0; y < 4; ++y)
    for (int x = 1; x < 5; ++x) mask.at(x, y, 0) = 1.0f;

  MaterialMaps m = init_estimate(mask);
  CHECK(validate_maps(m).empty());
  CHECK(m.normal.at(2, 1, 0) == 0.5f);
  CHECK(m.normal.at(2, 1, 2) == 1.0f);
  CHECK(m.diffuse.at(2, 1, 1) == 0.5f);
  CHECK(m.roughness.at(2, 1, 0) == 0.5f);
  CHECK(m.specular.at(2, 1, 0) == 0.1f);
  CHECK(m.sss.at(2, 1, 0) == 0.0f);
  CHECK(m.displacement.at(2, 1, 0) == 0.5f);
  CHECK(m.normal.at(0, 0, 2) == 0.0f);  // unmasked stays zero

  RegionLabels labels = classify_materials(m);
  for (int y = 0; y < 4; ++y)
    for (int x = 1; x < 5; ++x) CHECK(*labels.at(x, y) == MaterialCategory::kHair);

  CHECK_THROWS_AS(init_estimate(Image(3, 3, 3)), std::invalid_argument);
  Image halfmask(3, 3, 1, 0.5f);
  CHECK_THROWS_AS(init_estimate(halfmask), std::invalid_argument);
}

TEST_CASE("zero learning rate leaves any input bit-identical", "[estimator]") {
  MaterialMaps maps = varied_maps(6, 5);
  MaterialMaps before = maps;

  SECTION("training-loss mode") {
    StageConfig cfg =
        make_stage(Stage::kGeometry, 1, 0.0, LossMode::kTrainingLoss);
    MaterialMaps ref = init_estimate(maps.mask);
    optimize_stage(maps, ref, cfg, 0);
    CHECK(maps_bits_equal(maps, before));
  }

  SECTION("observation mode with a boundary-clamped channel") {
    Scene sc = small_scene(2);
    ObservationSet obs = render_observations(sc.maps, 0.0, 2);
    MaterialMaps est = init_estimate(sc.maps.mask);  // sss = 0 everywhere
    MaterialMaps start = est;
    StageConfig cfg = make_stage(Stage::kRss, 1, 0.0, LossMode::kObservationOnly);
    optimize_stage(est, obs, cfg);
    CHECK(maps_bits_equal(est, start));
  }
}

TEST_CASE("a perfect fit is a fixed point with a zero trace", "[estimator]") {
  MaterialMaps ref = varied_maps(6, 5);
  MaterialMaps pred = ref;
  for (Stage stage : {Stage::kGeometry, Stage::kRss, Stage::kFinetune}) {
    StageConfig cfg = make_stage(stage, 4, 0.05, LossMode::kTrainingLoss);
    StageTrace tr = optimize_stage(pred, ref, cfg, 7);
    REQUIRE(tr.steps.size() == 4);
    for (const LossReport& r : tr.steps) CHECK(r.total <= 1e-12);
    CHECK(tr.initial_eval.total <= 1e-12);
    CHECK(tr.final_eval.total <= 1e-12);
    CHECK(maps_bits_equal(pred, ref));
  }
}

TEST_CASE("albedo stage matches a dense grid search on one pixel", "[estimator]") {
  MaterialMaps gt = make_maps(1, 1);
  gt.mask.at(0, 0, 0) = 1.0f;
  gt.normal.at(0, 0, 0) = 0.5f;
  gt.normal.at(0, 0, 1) = 0.5f;
  gt.normal.at(0, 0, 2) = 1.0f;
  gt.diffuse.at(0, 0, 0) = 0.23f;
  gt.diffuse.at(0, 0, 1) = 0.61f;
  gt.diffuse.at(0, 0, 2) = 0.47f;
  gt.roughness.at(0, 0, 0) = 0.3f;
  gt.specular.at(0, 0, 0) = 0.0f;
  gt.sss.at(0, 0, 0) = 0.0f;
  gt.displacement.at(0, 0, 0) = 0.5f;

  ObservationSet obs = render_observations(gt, 0.0, 0);

  MaterialMaps est = init_estimate(gt.mask);
  est.normal = gt.normal;
  est.displacement = gt.displacement;
  // A small rate keeps the converged oscillation band narrow (the updates are
  // scale-normalized, so the band is proportional to the rate).
  StageConfig cfg =
      make_stage(Stage::kAlbedo, 500, 0.015, LossMode::kObservationOnly);
  optimize_stage(est, obs, cfg);

  // The stage renders with roughness pinned at 0.8 and specular at 0.03, so
  // the objective per diffuse channel is sum_i |A_i*d + B_i - obs_i| with
  // A, B taken from two probe shades. Scan d at 1/512 steps per channel.
  SurfaceState<double> probe{{0.0, 0.0, 1.0}, {0.0, 0.0, 0.0},
                             static_cast<double>(0.8f),
                             static_cast<double>(0.03f), 0.0};
  std::vector<double> a(obs.rig.size()), b(obs.rig.size());
  for (std::size_t i = 0; i < obs.rig.size(); ++i) {
    probe.diffuse = {0.0, 0.0, 0.0};
    b[i] = shade_one_light(probe, obs.rig[i])[0];
    probe.diffuse = {1.0, 1.0, 1.0};
    a[i] = shade_one_light(probe, obs.rig[i])[0] - b[i];
  }
  for (int c = 0; c < 3; ++c) {
    double best_d = 0.0, best_obj = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 512; ++k) {
      double d = k / 512.0, obj = 0.0;
      for (std::size_t i = 0; i < obs.rig.size(); ++i)
        obj += std::abs(a[i] * d + b[i] - obs.images[i].at(0, 0, c));
      if (obj < best_obj) {
        best_obj = obj;
        best_d = d;
      }
    }
    CHECK(std::abs(est.diffuse.at(0, 0, c) - best_d) <= 5e-3);
  }
}

TEST_CASE("stages touch only their optimized channels", "[estimator]") {
  Scene sc = small_scene(4);
  ObservationSet obs = render_observations(sc.maps, 0.0, 4);
  MaterialMaps est = init_estimate(sc.maps.mask);
  MaterialMaps before = est;

  StageConfig cfg = make_stage(Stage::kGeometry, 5, 0.05, LossMode::kObservationOnly);
  optimize_stage(est, obs, cfg);
  CHECK(bits_equal(est.diffuse, before.diffuse));
  CHECK(bits_equal(est.roughness, before.roughness));
  CHECK(bits_equal(est.specular, before.specular));
  CHECK(bits_equal(est.sss, before.sss));
  CHECK(bits_equal(est.mask, before.mask));
  CHECK(!bits_equal(est.normal, before.normal));
  CHECK(validate_maps(est).empty());

  MaterialMaps after_geo = est;
  StageConfig acfg = make_stage(Stage::kAlbedo, 5, 0.05, LossMode::kObservationOnly);
  optimize_stage(est, obs, acfg);
  CHECK(bits_equal(est.normal, after_geo.normal));
  CHECK(bits_equal(est.displacement, after_geo.displacement));
  CHECK(bits_equal(est.roughness, after_geo.roughness));
  CHECK(!bits_equal(est.diffuse, after_geo.diffuse));
}

TEST_CASE("per-stage loss endpoints never increase", "[estimator]") {
  Scene sc = small_scene(6);
  ObservationSet obs = render_observations(sc.maps, 0.0, 6);
  MaterialMaps est = init_estimate(sc.maps.mask);

  // The flat start measured under the finetune policy (all channels live) is
  // the baseline the whole schedule must beat decisively.
  double start = observation_loss(est, obs, default_policy(Stage::kFinetune)).total;
  std::vector<StageTrace> traces;
  for (StageConfig cfg : default_schedule(LossMode::kObservationOnly, 0.05, 40, 40, 40, 40)) {
    StageTrace tr = optimize_stage(est, obs, cfg);
    CHECK(tr.final_eval.total <= tr.initial_eval.total);
    CHECK(tr.seconds >= 0.0);
    CHECK(tr.stage == cfg.stage);
    REQUIRE(tr.steps.size() == static_cast<std::size_t>(cfg.iterations));
    traces.push_back(tr);
  }
  REQUIRE(traces.back().stage == Stage::kFinetune);
  CHECK(traces.back().final_eval.total < 0.5 * start);

  MaterialMaps fit = init_estimate(sc.maps.mask);
  for (StageConfig cfg : default_schedule(LossMode::kTrainingLoss, 0.05, 40, 40, 40, 40)) {
    StageTrace tr = optimize_stage(fit, sc.maps, cfg, 5);
    CHECK(tr.final_eval.total <= tr.initial_eval.total);
  }
}

TEST_CASE("a finetune-only schedule is the joint baseline", "[estimator]") {
  Scene sc = small_scene(8);
  ObservationSet obs = render_observations(sc.maps, 0.0, 8);

  EstimationResult a = run_progressive(
      obs, {make_stage(Stage::kFinetune, 12, 0.05, LossMode::kObservationOnly)});
  EstimationResult b = run_joint_baseline(obs, 12, 0.05);
  CHECK(maps_bits_equal(a.maps, b.maps));
  REQUIRE(a.stages.size() == 1);
  REQUIRE(b.stages.size() == 1);
  CHECK(a.stages[0].final_eval.total == b.stages[0].final_eval.total);

  EstimationResult zero = run_joint_baseline(obs, 0, 0.05);
  CHECK(maps_bits_equal(zero.maps, init_estimate(obs.mask)));
}

TEST_CASE("estimation is deterministic and thread-invariant", "[estimator]") {
  SceneSpec spec;
  spec.seed = 9;
  spec.width = 24;
  spec.height = 24;
  spec.num_regions = 3;
  Scene sc = generate_scene(spec);
  ObservationSet obs = render_observations(sc.maps, 0.0, 9);
  auto sched = default_schedule(LossMode::kObservationOnly, 0.05, 6, 6, 6, 6);

  EstimationResult t1 = run_progressive(obs, sched, {}, 1);
  EstimationResult t4 = run_progressive(obs, sched, {}, 4);
  EstimationResult again = run_progressive(obs, sched, {}, 1);
  CHECK(maps_bits_equal(t1.maps, t4.maps));
  CHECK(maps_bits_equal(t1.maps, again.maps));
  for (std::size_t s = 0; s < t1.stages.size(); ++s)
    for (std::size_t i = 0; i < t1.stages[s].steps.size(); ++i) {
      CHECK(t1.stages[s].steps[i].total == t4.stages[s].steps[i].total);
      CHECK(t1.stages[s].steps[i].pixel == t4.stages[s].steps[i].pixel);
    }

  MaterialMaps fit1 = init_estimate(sc.maps.mask);
  MaterialMaps fit4 = init_estimate(sc.maps.mask);
  StageConfig cfg = make_stage(Stage::kFinetune, 6, 0.05, LossMode::kTrainingLoss);
  StageTrace tr1 = optimize_stage(fit1, sc.maps, cfg, 3, {}, 1);
  StageTrace tr4 = optimize_stage(fit4, sc.maps, cfg, 3, {}, 4);
  CHECK(maps_bits_equal(fit1, fit4));
  for (std::size_t i = 0; i < tr1.steps.size(); ++i)
    CHECK(tr1.steps[i].total == tr4.steps[i].total);
}

TEST_CASE("stage and schedule validation", "[estimator]") {
  Scene sc = small_scene(1);
  ObservationSet obs = render_observations(sc.maps, 0.0, 1);
  MaterialMaps est = init_estimate(sc.maps.mask);

  StageConfig wrong_mode = make_stage(Stage::kGeometry, 3, 0.05, LossMode::kTrainingLoss);
  CHECK_THROWS_AS(optimize_stage(est, obs, wrong_mode), std::invalid_argument);

  StageConfig wrong_obs = make_stage(Stage::kGeometry, 3, 0.05, LossMode::kObservationOnly);
  CHECK_THROWS_AS(optimize_stage(est, sc.maps, wrong_obs, 0), std::invalid_argument);

  StageConfig bad_lr = make_stage(Stage::kRss, 3, -0.1, LossMode::kObservationOnly);
  CHECK_THROWS_AS(optimize_stage(est, obs, bad_lr), std::invalid_argument);

  StageConfig bad_iter = make_stage(Stage::kRss, -1, 0.05, LossMode::kObservationOnly);
  CHECK_THROWS_AS(optimize_stage(est, obs, bad_iter), std::invalid_argument);

  StageConfig mismatched = make_stage(Stage::kRss, 3, 0.05, LossMode::kObservationOnly);
  mismatched.policy = default_policy(Stage::kAlbedo);
  CHECK_THROWS_AS(optimize_stage(est, obs, mismatched), std::invalid_argument);

  SECTION("schedules must walk the stages in order") {
    std::vector<StageConfig> backwards = {
        make_stage(Stage::kAlbedo, 2, 0.05, LossMode::kObservationOnly),
        make_stage(Stage::kGeometry, 2, 0.05, LossMode::kObservationOnly)};
    CHECK_THROWS_AS(run_progressive(obs, backwards), std::invalid_argument);
    std::vector<StageConfig> twice = {
        make_stage(Stage::kRss, 2, 0.05, LossMode::kObservationOnly),
        make_stage(Stage::kRss, 2, 0.05, LossMode::kObservationOnly)};
    CHECK_THROWS_AS(run_progressive(obs, twice), std::invalid_argument);
    CHECK_THROWS_AS(run_progressive(obs, {}), std::invalid_argument);
  }

  SECTION("observations must cover the fixed rig") {
    ObservationSet broken = obs;
    broken.rig[4].direction = normalize(Vec3d{0.5, 0.5, 0.5});
    StageConfig cfg = make_stage(Stage::kGeometry, 2, 0.05, LossMode::kObservationOnly);
    CHECK_THROWS_AS(optimize_stage(est, broken, cfg), std::invalid_argument);
  }

  SECTION("observation mask must match the estimate") {
    Image mask2 = obs.mask;
    REQUIRE(mask2.at(8, 8, 0) == 1.0f);
    mask2.at(8, 8, 0) = 0.0f;
    MaterialMaps est2 = init_estimate(mask2);
    StageConfig cfg = make_stage(Stage::kGeometry, 2, 0.05, LossMode::kObservationOnly);
    CHECK_THROWS_AS(optimize_stage(est2, obs, cfg), std::invalid_argument);
  }
}
