#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

#include "pbrmat/lighting.hpp"

using namespace pbrmat;

namespace {

double angle_deg(const Vec3d& a, const Vec3d& b) {
  double c = std::clamp(dot(a, b), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST_CASE("fixed rig has 36 distinct unit directions above the horizon", "[lighting]") {
  LightRig rig = build_fixed_rig();
  REQUIRE(rig.size() == 36);
  for (const DirectionalLight& l : rig) {
    CHECK(std::abs(norm(l.direction) - 1.0) <= 1e-12);
    CHECK(l.direction.z >= 0.0);
    CHECK(l.intensity.x == 5.0);
    CHECK(l.intensity.y == 5.0);
    CHECK(l.intensity.z == 5.0);
    CHECK(angle_deg(l.direction, Vec3d{0, 0, 1}) > 1e-6);  // zenith absent
  }
  for (std::size_t i = 0; i < rig.size(); ++i)
    for (std::size_t j = i + 1; j < rig.size(); ++j)
      CHECK(angle_deg(rig[i].direction, rig[j].direction) > 1.0);
}

TEST_CASE("fixed rig spacing is 10 degrees with a 20-degree zenith gap", "[lighting]") {
  LightRig rig = build_fixed_rig();
  for (int plane = 0; plane < 2; ++plane) {
    int base = plane * 18;
    // Entries walk 0..180 degrees in order; the 9th pair brackets the
    // missing zenith.
    for (int i = 0; i < 17; ++i) {
      double a = angle_deg(rig[base + i].direction, rig[base + i + 1].direction);
      double expect = (i == 8) ? 20.0 : 10.0;
      CHECK(std::abs(a - expect) <= 1e-9);
    }
    // In-plane means exactly that: the off-plane coordinate is zero.
    for (int i = 0; i < 18; ++i) {
      double off = plane == 0 ? rig[base + i].direction.y
                              : rig[base + i].direction.x;
      CHECK(off == 0.0);
    }
  }
  CHECK(std::abs(angle_deg(rig[0].direction, Vec3d{1, 0, 0})) <= 1e-9);
  CHECK(std::abs(angle_deg(rig[18].direction, Vec3d{0, 1, 0})) <= 1e-9);
}

TEST_CASE("fixed rig z-sum matches the closed form", "[lighting]") {
  // Sum of sin(k*10deg) over both planes, zenith removed: 2*(cot(5deg) - 1).
  double sum = 0.0;
  for (const DirectionalLight& l : build_fixed_rig()) sum += l.direction.z;
  CHECK(std::abs(sum - 20.860104605522686) <= 1e-9);
}

TEST_CASE("random light stays in range and replays by counter", "[lighting]") {
  double zmin = 1.0, zmax = 0.0;
  for (std::uint64_t c = 0; c < 10000; ++c) {
    DirectionalLight l = sample_random_light(123, c);
    REQUIRE(std::abs(norm(l.direction) - 1.0) <= 1e-12);
    REQUIRE(l.direction.z >= 0.0);
    REQUIRE(l.intensity.x >= 3.0);
    REQUIRE(l.intensity.x < 8.0);
    REQUIRE(l.intensity.x == l.intensity.y);
    REQUIRE(l.intensity.x == l.intensity.z);
    zmin = std::min(zmin, l.direction.z);
    zmax = std::max(zmax, l.direction.z);
  }
  CHECK(zmin < 0.05);
  CHECK(zmax > 0.95);

  DirectionalLight a = sample_random_light(77, 41);
  DirectionalLight b = sample_random_light(77, 41);
  CHECK(a.direction.x == b.direction.x);
  CHECK(a.intensity.x == b.intensity.x);
  CHECK(sample_random_light(78, 41).direction.x != a.direction.x);
}

TEST_CASE("training rig appends one random light to the fixed 36", "[lighting]") {
  LightRig rig = build_training_rig(9, 17);
  REQUIRE(rig.size() == 37);
  LightRig fixed = build_fixed_rig();
  for (int i = 0; i < 36; ++i) {
    CHECK(rig[i].direction.x == fixed[i].direction.x);
    CHECK(rig[i].direction.z == fixed[i].direction.z);
  }
  DirectionalLight r = sample_random_light(9, 17);
  CHECK(rig[36].direction.x == r.direction.x);
  CHECK(rig[36].intensity.x == r.intensity.x);
}

TEST_CASE("envmap constructor validates shape", "[lighting]") {
  CHECK_THROWS_AS(make_envmap(Image(7, 4, 3)), std::invalid_argument);
  CHECK_THROWS_AS(make_envmap(Image(8, 4, 1)), std::invalid_argument);
  CHECK_NOTHROW(make_envmap(Image(8, 4, 3)));
}

TEST_CASE("envmap lights conserve total power", "[lighting]") {
  const double four_pi = 4.0 * std::numbers::pi;

  SECTION("uniform map integrates to 4*pi per unit radiance") {
    EnvironmentMap env = make_envmap(Image(16, 8, 3, 0.7f));
    const double radiance = static_cast<double>(0.7f);
    for (int k : {1, 8, 32, 128}) {
      LightRig rig = envmap_to_lights(env, k);
      REQUIRE(!rig.empty());
      REQUIRE(static_cast<int>(rig.size()) <= k);
      Vec3d total{};
      for (const DirectionalLight& l : rig) {
        CHECK(std::abs(norm(l.direction) - 1.0) <= 1e-12);
        total = total + l.intensity;
      }
      CHECK(std::abs(total.x - radiance * four_pi) <= 1e-9);
      CHECK(std::abs(total.y - radiance * four_pi) <= 1e-9);
      CHECK(std::abs(total.z - radiance * four_pi) <= 1e-9);
    }
  }

  SECTION("non-uniform map conserves the summed texel power exactly") {
    Image img(16, 8, 3);
    for (int v = 0; v < 8; ++v)
      for (int u = 0; u < 16; ++u)
        for (int c = 0; c < 3; ++c)
          img.at(u, v, c) = static_cast<float>(0.1 + 0.05 * u + 0.2 * v + 0.3 * c);
    double want = 0.0;
    for (int v = 0; v < 8; ++v) {
      double t0 = std::numbers::pi * v / 8.0, t1 = std::numbers::pi * (v + 1) / 8.0;
      double omega = (2.0 * std::numbers::pi / 16.0) * (std::cos(t0) - std::cos(t1));
      for (int u = 0; u < 16; ++u) want += img.at(u, v, 0) * omega;
    }
    LightRig rig = envmap_to_lights(make_envmap(std::move(img)), 18);
    double got = 0.0;
    for (const DirectionalLight& l : rig) got += l.intensity.x;
    CHECK(std::abs(got - want) <= 1e-12 * std::abs(want));
  }

  SECTION("k outside [1, texels] throws") {
    EnvironmentMap env = make_envmap(Image(8, 4, 3, 1.0f));
    CHECK_THROWS_AS(envmap_to_lights(env, 0), std::invalid_argument);
    CHECK_THROWS_AS(envmap_to_lights(env, 33), std::invalid_argument);
    CHECK_NOTHROW(envmap_to_lights(env, 32));
  }
}

TEST_CASE("format_rig prints one parseable line per light", "[lighting]") {
  LightRig rig = build_fixed_rig();
  std::string text = format_rig(rig);
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    double d[6];
    REQUIRE(std::sscanf(line.c_str(), "%lf %lf %lf %lf %lf %lf", &d[0], &d[1],
                        &d[2], &d[3], &d[4], &d[5]) == 6);
    CHECK(std::abs(d[0] - rig[n].direction.x) <= 1e-9);
    CHECK(std::abs(d[2] - rig[n].direction.z) <= 1e-9);
    CHECK(d[3] == 5.0);
    ++n;
  }
  CHECK(n == 36);
}
