#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "harmonize/synth.hpp"
#include "harmonize/training.hpp"

using namespace harmonize;

namespace {

constexpr double kDeg = kPi / 180.0;

std::array<double, 3> light_from(double azimuth, double elevation) {
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
          std::sin(elevation)};
}

// 8x4 box standing on ground_row, centered at column 32
Tensor box_mask(int H, int W, int ground_row, int height, int width, int cx) {
  Tensor m({1, H, W});
  for (int r = ground_row - height; r < ground_row; ++r)
    for (int c = cx - width / 2; c < cx + width / 2; ++c) m.at3(0, r, c) = 1.0;
  return m;
}

struct Extent {
  double min_c = 1e9, max_c = -1e9, min_r = 1e9, max_r = -1e9, area = 0;
};

Extent darkened_extent(const Tensor& mult) {
  Extent e;
  for (int r = 0; r < mult.dim(1); ++r)
    for (int c = 0; c < mult.dim(2); ++c)
      if (mult.at3(0, r, c) < 0.99) {
        e.min_c = std::min(e.min_c, static_cast<double>(c));
        e.max_c = std::max(e.max_c, static_cast<double>(c));
        e.min_r = std::min(e.min_r, static_cast<double>(r));
        e.max_r = std::max(e.max_r, static_cast<double>(r));
        e.area += 1.0 - mult.at3(0, r, c);
      }
  return e;
}

}  // namespace

TEST_CASE("zenith light: shadow footprint sits directly below the object") {
  int H = 64, W = 64, ground = 40;
  Tensor m = box_mask(H, W, ground, 10, 8, 32);
  Tensor mult = render_shadow(m, {0.0, 0.0, 1.0}, ground, 0.5);
  Extent e = darkened_extent(mult);
  CHECK(e.area > 0.0);
  // same columns as the object, just below the ground line, squashed
  CHECK(e.min_c >= 32 - 4 - 1);
  CHECK(e.max_c <= 32 + 4);
  CHECK(e.min_r >= ground - 1);
  CHECK(e.max_r <= ground + 10 * kMinShadowDrop + 1);
  // interior darkening equals 1 - attenuation
  CHECK(mult.at3(0, ground + 1, 32) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("elevation 45 along +x: shadow length equals object height") {
  int H = 64, W = 64, ground = 40, height = 10;
  Tensor m = box_mask(H, W, ground, height, 8, 32);
  Tensor mult = render_shadow(m, light_from(0.0, 45.0 * kDeg), ground, 0.5);
  Extent e = darkened_extent(mult);
  // light from +x (screen right) -> shadow extends left by cot(45) * height
  double reach = (32 - 4) - e.min_c;  // from the object's left edge
  CHECK(reach == doctest::Approx(height).epsilon(0.2));
}

TEST_CASE("light from screen-left: shadows extend screen-right") {
  int H = 64, W = 64, ground = 40;
  Tensor m = box_mask(H, W, ground, 10, 8, 24);
  Tensor mult = render_shadow(m, light_from(kPi, 40.0 * kDeg), ground, 0.5);
  Extent e = darkened_extent(mult);
  double wc = 0, ws = 0;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      double d = 1.0 - mult.at3(0, r, c);
      wc += d * c;
      ws += d;
    }
  CHECK(ws > 0.0);
  CHECK(wc / ws > 24.0);  // centroid right of the object
  CHECK(e.max_c > 24 + 4 + 5);
}

TEST_CASE("lower elevation casts a strictly longer shadow") {
  int H = 96, W = 96, ground = 50, height = 12;
  Tensor m = box_mask(H, W, ground, height, 8, 60);
  double prev = -1.0;
  for (double elev : {60.0, 45.0, 30.0, 20.0}) {
    Tensor mult = render_shadow(m, light_from(0.0, elev * kDeg), ground, 0.5);
    Extent e = darkened_extent(mult);
    double len = (60 - 4) - e.min_c;
    CHECK(len > prev);
    prev = len;
  }
}

TEST_CASE("near-horizontal light is rejected") {
  Tensor m({1, 16, 16});
  CHECK_THROWS_AS(render_shadow(m, light_from(0.0, 2.0 * kDeg), 8, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(shadow_shear({1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("shadow axis points away from the light's horizontal component") {
  auto a = shadow_axis_2d(light_from(0.0, 45.0 * kDeg));
  CHECK(a[0] < -0.9);  // light +x -> shadow -x
  auto b = shadow_axis_2d(light_from(kPi / 2, 45.0 * kDeg));
  CHECK(std::abs(b[0]) < 0.7);
  CHECK(std::abs(std::hypot(a[0], a[1]) - 1.0) < 1e-12);
}

TEST_CASE("gen_scene is bit-deterministic per seed") {
  SynthConfig cfg;
  CompositeSample a = gen_scene(42, cfg);
  CompositeSample b = gen_scene(42, cfg);
  CHECK(a.bg.data == b.bg.data);
  CHECK(a.x.data == b.x.data);
  CHECK(a.y.data == b.y.data);
  CHECK(a.Ygl.data == b.Ygl.data);
  CHECK(a.m_f.data == b.m_f.data);
  CHECK(a.m_Y.data == b.m_Y.data);
  CHECK(a.gt_sh.channels == b.gt_sh.channels);
  CompositeSample c = gen_scene(43, cfg);
  CHECK(a.bg.data != c.bg.data);
}

TEST_CASE("gt_sh recovers the sampled light direction within 5 degrees") {
  SynthConfig cfg;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u, 6u, 7u, 8u}) {
    CompositeSample s = gen_scene(seed, cfg);
    auto dir = dominant_light_direction(s.gt_sh);
    CHECK(angle_between(dir, s.gt_light_dir) < 5.0 * kDeg);
  }
}

TEST_CASE("direct composite equals the warped background outside the mask") {
  SynthConfig cfg;
  CompositeSample s = gen_scene(9, cfg);
  Homography sq2reg = estimate_homography(Region::full_square(), s.region);
  Tensor Xloc = warp_value(s.bg, sq2reg, cfg.n, cfg.n);
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < cfg.n; ++r)
      for (int c = 0; c < cfg.n; ++c)
        if (s.m_f.at3(0, r, c) == 0.0)
          CHECK(s.x.at3(ch, r, c) == Xloc.at3(ch, r, c));
}

TEST_CASE("scene shadows are detectable in the real local patch") {
  SynthConfig cfg;
  int detectable = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    CompositeSample s = gen_scene(seed, cfg);
    if (darkening_axis(s.x, s.y, s.m_f).found) ++detectable;
  }
  CHECK(detectable >= 16);  // >= 80% of scenes
}

TEST_CASE("selected regions are valid and below the horizon blockers") {
  SynthConfig cfg;
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    CompositeSample s = gen_scene(seed, cfg);
    CHECK(s.region.valid());
    // mask partition: values in [0,1], complement exact
    for (double v : s.m_Y.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("sampled azimuths are uniform (chi-square, 8 bins)") {
  SynthConfig cfg;
  const int kBins = 8, kScenes = 400;
  int bins[kBins] = {0};
  for (std::uint64_t seed = 1000; seed < 1000 + kScenes; ++seed) {
    CompositeSample s = gen_scene(seed, cfg);
    double az = std::atan2(s.gt_light_dir[1], s.gt_light_dir[0]);
    if (az < 0) az += 2.0 * kPi;
    bins[std::min(kBins - 1, static_cast<int>(az / (2.0 * kPi) * kBins))] += 1;
  }
  double expect = static_cast<double>(kScenes) / kBins, chi2 = 0.0;
  for (int b : bins) chi2 += (b - expect) * (b - expect) / expect;
  CHECK(chi2 < 24.32);  // 99.9th percentile of chi-square with 7 dof
}

TEST_CASE("resize_bilinear: identity and constants preserved") {
  Tensor img({2, 5, 7});
  std::mt19937_64 rng(77);
  img.fill_uniform(rng, -1.0, 1.0);
  Tensor same = resize_bilinear(img, 5, 7);
  for (size_t i = 0; i < img.size(); ++i) CHECK(same[i] == doctest::Approx(img[i]).epsilon(1e-12));
  Tensor flat({1, 4, 4}, 0.25);
  Tensor up = resize_bilinear(flat, 9, 5);
  for (double v : up.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}
