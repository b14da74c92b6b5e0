#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pbrmat/lighting.hpp"
#include "pbrmat/losses.hpp"
#include "test_util.hpp"

using namespace pbrmat;
using testutil::flat_maps;
using testutil::varied_maps;

TEST_CASE("stage names", "[losses]") {
  CHECK(std::string(to_string(Stage::kGeometry)) == "geometry");
  CHECK(std::string(to_string(Stage::kAlbedo)) == "albedo");
  CHECK(std::string(to_string(Stage::kRss)) == "rss");
  CHECK(std::string(to_string(Stage::kFinetune)) == "finetune");
}

TEST_CASE("default policies pin the documented channels", "[losses]") {
  ControlPolicy g = default_policy(Stage::kGeometry);
  CHECK(g.stage == Stage::kGeometry);
  CHECK(g.normal.source == ChannelSource::kOptimized);
  CHECK(g.displacement.source == ChannelSource::kOptimized);
  CHECK(g.roughness.source == ChannelSource::kFixed);
  CHECK(g.roughness.fixed_value == 0.2);
  CHECK(g.specular.source == ChannelSource::kFixed);
  CHECK(g.specular.fixed_value == 0.5);
  CHECK(g.diffuse.source == ChannelSource::kReference);
  CHECK(g.sss.source == ChannelSource::kReference);

  ControlPolicy a = default_policy(Stage::kAlbedo);
  CHECK(a.diffuse.source == ChannelSource::kOptimized);
  CHECK(a.roughness.fixed_value == 0.8);
  CHECK(a.specular.fixed_value == 0.03);
  CHECK(a.normal.source == ChannelSource::kReference);
  CHECK(a.sss.source == ChannelSource::kReference);
  CHECK(a.displacement.source == ChannelSource::kReference);

  ControlPolicy r = default_policy(Stage::kRss);
  CHECK(r.roughness.source == ChannelSource::kOptimized);
  CHECK(r.specular.source == ChannelSource::kOptimized);
  CHECK(r.sss.source == ChannelSource::kOptimized);
  CHECK(r.normal.source == ChannelSource::kReference);
  CHECK(r.diffuse.source == ChannelSource::kReference);
  CHECK(r.displacement.source == ChannelSource::kReference);

  ControlPolicy f = default_policy(Stage::kFinetune);
  for (MapChannel c : kAllChannels)
    CHECK(f.channel(c).source == ChannelSource::kOptimized);

  CHECK(optimized_channels(g).size() == 2);
  CHECK(optimized_channels(a).size() == 1);
  CHECK(optimized_channels(r).size() == 3);
  CHECK(optimized_channels(f).size() == 6);
}

TEST_CASE("l1 map loss basics", "[losses]") {
  MaterialMaps ref = varied_maps(4, 4);

  SECTION("identity is exactly zero") {
    CHECK(l1_map_loss(ref, ref, {MapChannel::kDiffuse}) == 0.0);
    CHECK(l1_map_loss(ref, ref, {MapChannel::kNormal, MapChannel::kSss}) == 0.0);
  }

  SECTION("constant offset") {
    MaterialMaps a = flat_maps(4, 4, 0.5f);
    MaterialMaps b = a;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x)
        for (int c = 0; c < 3; ++c) b.diffuse.at(x, y, c) = 0.75f;
    CHECK(l1_map_loss(b, a, {MapChannel::kDiffuse}) == 0.25);
  }

  SECTION("multi-channel request averages the per-channel losses") {
    MaterialMaps pred = varied_maps(4, 4);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) {
        pred.roughness.at(x, y, 0) *= 0.5f;
        pred.specular.at(x, y, 0) += 0.1f;
      }
    double lr = l1_map_loss(pred, ref, {MapChannel::kRoughness});
    double ls = l1_map_loss(pred, ref, {MapChannel::kSpecular});
    double both =
        l1_map_loss(pred, ref, {MapChannel::kRoughness, MapChannel::kSpecular});
    CHECK(std::abs(both - 0.5 * (lr + ls)) <= 1e-15);
  }

  SECTION("empty channel list throws") {
    CHECK_THROWS_AS(l1_map_loss(ref, ref, {}), std::invalid_argument);
  }

  SECTION("misaligned maps throw") {
    MaterialMaps other = varied_maps(5, 4);
    CHECK_THROWS_AS(l1_map_loss(ref, other, {MapChannel::kDiffuse}),
                    std::invalid_argument);
    MaterialMaps remasked = varied_maps(4, 4);
    remasked.mask.at(2, 2, 0) = 0.0f;
    CHECK_THROWS_AS(l1_map_loss(ref, remasked, {MapChannel::kDiffuse}),
                    std::invalid_argument);
  }
}

TEST_CASE("render loss identity and additivity", "[losses]") {
  MaterialMaps ref = varied_maps(4, 4);
  MaterialMaps pred = varied_maps(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      if (pred.mask.at(x, y, 0) != 0.0f) pred.roughness.at(x, y, 0) += 0.15f;

  LightRig rig = build_fixed_rig();
  CHECK(multi_illum_render_loss(ref, ref, rig) == 0.0);

  LightRig a(rig.begin(), rig.begin() + 18);
  LightRig b(rig.begin() + 18, rig.end());
  double whole = multi_illum_render_loss(pred, ref, rig);
  double parts =
      multi_illum_render_loss(pred, ref, a) + multi_illum_render_loss(pred, ref, b);
  CHECK(whole > 0.0);
  CHECK(std::abs(whole - parts) <= 1e-12 * whole);

  LightRig two{rig[3], rig[24]};
  double sum2 = multi_illum_render_loss(pred, ref, {rig[3]}) +
                multi_illum_render_loss(pred, ref, {rig[24]});
  CHECK(multi_illum_render_loss(pred, ref, two) == sum2);

  CHECK_THROWS_AS(multi_illum_render_loss(pred, ref, {}), std::invalid_argument);
}

TEST_CASE("render loss is linear in a diffuse-only gap", "[losses]") {
  // With specular and sss shared, the per-light difference is proportional
  // to the diffuse gap, so halving the gap halves the loss (up to the float
  // rounding of the stored renders).
  MaterialMaps ref = varied_maps(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      ref.sss.at(x, y, 0) = 0.0f;
      ref.specular.at(x, y, 0) = 0.0f;
    }
  MaterialMaps black = ref, half = ref;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) {
        black.diffuse.at(x, y, c) = 0.0f;
        half.diffuse.at(x, y, c) = 0.5f * ref.diffuse.at(x, y, c);
      }
  LightRig rig = build_fixed_rig();
  double lb = multi_illum_render_loss(black, ref, rig);
  double lh = multi_illum_render_loss(half, ref, rig);
  CHECK(lb > 0.0);
  CHECK(std::abs(lh - 0.5 * lb) <= 1e-6 * lb);
}

TEST_CASE("cpr loss sees only optimized channels", "[losses]") {
  MaterialMaps ref = varied_maps(4, 4);
  MaterialMaps pred = varied_maps(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      if (pred.mask.at(x, y, 0) == 0.0f) continue;
      Vec3d n = normalize(Vec3d{0.2, -0.1, 1.0});
      pred.normal.at(x, y, 0) = static_cast<float>(n.x * 0.5 + 0.5);
      pred.normal.at(x, y, 1) = static_cast<float>(n.y * 0.5 + 0.5);
      pred.normal.at(x, y, 2) = static_cast<float>(n.z * 0.5 + 0.5);
    }
  ControlPolicy policy = default_policy(Stage::kGeometry);
  LightRig rig = build_fixed_rig();

  double base = cpr_loss(pred, ref, policy, rig);
  CHECK(base > 0.0);
  CHECK(cpr_loss(ref, ref, policy, rig) == 0.0);

  // Perturbing any non-optimized channel of pred must not move the value.
  MaterialMaps noisy = pred;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      if (noisy.mask.at(x, y, 0) == 0.0f) continue;
      noisy.roughness.at(x, y, 0) = 0.93f;
      noisy.specular.at(x, y, 0) = 0.02f;
      noisy.sss.at(x, y, 0) = 0.6f;
      for (int c = 0; c < 3; ++c) noisy.diffuse.at(x, y, c) = 0.11f;
    }
  CHECK(cpr_loss(noisy, ref, policy, rig) == base);
}

TEST_CASE("glossier controls amplify a normal error", "[losses]") {
  MaterialMaps ref = flat_maps(6, 6);
  MaterialMaps pred = ref;
  Vec3d tilt = normalize(Vec3d{std::sin(10.0 * std::numbers::pi / 180.0), 0.0,
                               std::cos(10.0 * std::numbers::pi / 180.0)});
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      pred.normal.at(x, y, 0) = static_cast<float>(tilt.x * 0.5 + 0.5);
      pred.normal.at(x, y, 1) = 0.5f;
      pred.normal.at(x, y, 2) = static_cast<float>(tilt.z * 0.5 + 0.5);
    }

  ControlPolicy glossy = default_policy(Stage::kGeometry);  // r=0.2, s=0.5
  ControlPolicy matte = glossy;
  matte.roughness.fixed_value = 0.8;
  matte.specular.fixed_value = 0.03;

  LightRig rig = build_fixed_rig();
  double with_glossy = cpr_loss(pred, ref, glossy, rig);
  double with_matte = cpr_loss(pred, ref, matte, rig);
  CHECK(with_glossy > with_matte);
}

TEST_CASE("cpr rejects unsupported policies", "[losses]") {
  MaterialMaps ref = varied_maps(3, 3);
  LightRig rig{build_fixed_rig()[5]};
  CHECK_THROWS_AS(cpr_loss(ref, ref, default_policy(Stage::kFinetune), rig),
                  std::invalid_argument);

  ControlPolicy bad = default_policy(Stage::kGeometry);
  bad.normal = {ChannelSource::kFixed, 0.5};
  CHECK_THROWS_AS(cpr_loss(ref, ref, bad, rig), std::invalid_argument);

  ControlPolicy bad2 = default_policy(Stage::kAlbedo);
  bad2.diffuse = {ChannelSource::kFixed, 0.3};
  CHECK_THROWS_AS(cpr_loss(ref, ref, bad2, rig), std::invalid_argument);
}

TEST_CASE("total stage loss combines its terms", "[losses]") {
  MaterialMaps ref = varied_maps(4, 4);
  MaterialMaps pred = varied_maps(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      if (pred.mask.at(x, y, 0) == 0.0f) continue;
      pred.roughness.at(x, y, 0) = 0.7f;
      pred.specular.at(x, y, 0) = 0.3f;
      pred.sss.at(x, y, 0) = 0.2f;
    }
  LightRig rig = build_fixed_rig();
  ControlPolicy policy = default_policy(Stage::kRss);

  LossReport rep = total_stage_loss(pred, ref, policy, rig);
  CHECK(rep.masked_pixels == 15);
  CHECK(rep.pixel ==
        l1_map_loss(pred, ref, {MapChannel::kRoughness, MapChannel::kSpecular,
                                MapChannel::kSss}));
  CHECK(rep.cpr == cpr_loss(pred, ref, policy, rig));
  CHECK(rep.render == 0.0);
  CHECK(rep.total == rep.pixel + rep.cpr);

  LossReport weighted = total_stage_loss(pred, ref, policy, rig, {}, 2.0, 0.25);
  CHECK(weighted.total == 2.0 * rep.pixel + 0.25 * rep.cpr);

  LossReport pixel_only = total_stage_loss(pred, ref, policy, rig, {}, 1.0, 0.0);
  CHECK(pixel_only.total == rep.pixel);

  LossReport ft =
      total_stage_loss(pred, ref, default_policy(Stage::kFinetune), rig);
  CHECK(ft.cpr == 0.0);
  CHECK(ft.render == multi_illum_render_loss(pred, ref, rig));
  CHECK(ft.total == ft.pixel + ft.render);
  CHECK(total_stage_loss(ref, ref, policy, rig, {}, 0.0, 1.0).total == 0.0);
}

TEST_CASE("observation sets validate their shape", "[losses]") {
  ObservationSet obs;
  obs.rig = {build_fixed_rig()[0], build_fixed_rig()[1]};
  obs.mask = Image(2, 2, 1, 1.0f);
  obs.images = {Image(2, 2, 3, 0.1f)};
  CHECK_THROWS_AS(validate_observations(obs), std::invalid_argument);

  obs.images.push_back(Image(2, 2, 3, 0.2f));
  CHECK_NOTHROW(validate_observations(obs));

  obs.images[1] = Image(2, 3, 3, 0.2f);
  CHECK_THROWS_AS(validate_observations(obs), std::invalid_argument);

  obs.images[1] = Image(2, 2, 1, 0.2f);
  CHECK_THROWS_AS(validate_observations(obs), std::invalid_argument);

  obs.images[1] = Image(2, 2, 3, 0.2f);
  obs.mask.at(0, 0, 0) = 0.25f;
  CHECK_THROWS_AS(validate_observations(obs), std::invalid_argument);
}
