#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "harmonize/sh.hpp"

using namespace harmonize;

TEST_CASE("sh_basis closed forms") {
  auto y = sh_basis({0.0, 0.0, 1.0}, 1);
  CHECK(y[0] == doctest::Approx(0.2820947917738781).epsilon(1e-12));
  CHECK(y[SHCoefficients::index(1, -1)] == doctest::Approx(0.0));
  CHECK(y[SHCoefficients::index(1, 0)] == doctest::Approx(0.4886025119029199).epsilon(1e-12));
  CHECK(y[SHCoefficients::index(1, 1)] == doctest::Approx(0.0));

  auto yx = sh_basis({1.0, 0.0, 0.0}, 1);
  CHECK(yx[SHCoefficients::index(1, 1)] == doctest::Approx(0.4886025119029199).epsilon(1e-12));
  auto yy = sh_basis({0.0, 1.0, 0.0}, 1);
  CHECK(yy[SHCoefficients::index(1, -1)] == doctest::Approx(0.4886025119029199).epsilon(1e-12));
}

TEST_CASE("sh_basis input validation") {
  CHECK_THROWS(sh_basis({0.5, 0.0, 0.0}, 2));
  CHECK_THROWS(sh_basis({0.0, 0.0, 1.0}, -1));
}

TEST_CASE("Monte-Carlo Gram matrix near identity for L<=3") {
  const int L = 3, n = (L + 1) * (L + 1);
  std::vector<double> gram(static_cast<size_t>(n) * n, 0.0);
  // stratified over (cos theta, phi): 1000 x 1000 cell centers
  const int A = 1000, B = 1000;
  for (int a = 0; a < A; ++a) {
    double ct = -1.0 + 2.0 * (a + 0.5) / A;
    double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int b = 0; b < B; ++b) {
      double phi = 2.0 * kPi * (b + 0.5) / B;
      auto y = sh_basis({st * std::cos(phi), st * std::sin(phi), ct}, L);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
          gram[static_cast<size_t>(i) * n + j] += y[static_cast<size_t>(i)] * y[static_cast<size_t>(j)];
    }
  }
  double w = 4.0 * kPi / (static_cast<double>(A) * B);
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double v = gram[static_cast<size_t>(i) * n + j] * w - (i == j ? 1.0 : 0.0);
      worst = std::max(worst, std::abs(v));
    }
  CHECK(worst < 2e-3);
}

TEST_CASE("reconstruct single-term sums") {
  SHCoefficients c(1);
  for (int ch = 0; ch < 3; ++ch) c.channels[ch][0] = 2.0 + ch;
  Tensor env = reconstruct_illum_map(c, 8, 16);
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < 8; ++r)
      for (int col = 0; col < 16; ++col)
        CHECK(env.at3(ch, r, col) ==
              doctest::Approx((2.0 + ch) * 0.2820947917738781).epsilon(1e-12));

  SHCoefficients cz(1);
  cz.channels[0][SHCoefficients::index(1, 0)] = 1.5;
  Tensor ez = reconstruct_illum_map(cz, 16, 32);
  for (int r = 0; r < 16; ++r) {
    double theta = kPi * (r + 0.5) / 16;
    CHECK(ez.at3(0, r, 3) ==
          doctest::Approx(1.5 * 0.4886025119029199 * std::cos(theta)).epsilon(1e-12));
  }
}

TEST_CASE("project constant map hits DC only") {
  // phi sums cancel m != 0 terms exactly; tall H drives the theta quadrature
  // error below 1e-6 for the m = 0 bands
  Tensor env({3, 2048, 64}, 0.7);
  SHCoefficients c = project_to_sh(env, 2);
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(c.channels[ch][0] == doctest::Approx(0.7 * 2.0 * std::sqrt(kPi)).epsilon(1e-6));
    for (int i = 1; i < c.per_channel(); ++i) CHECK(std::abs(c.channels[ch][i]) < 1e-6);
  }
}

TEST_CASE("project/reconstruct round trip at 256x512") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SHCoefficients c(2);
  for (auto& ch : c.channels)
    for (auto& v : ch) v = u(rng);
  Tensor env = reconstruct_illum_map(c, 256, 512);
  SHCoefficients back = project_to_sh(env, 2);
  for (int ch = 0; ch < 3; ++ch)
    for (int i = 0; i < c.per_channel(); ++i)
      CHECK(std::abs(back.channels[ch][i] - c.channels[ch][i]) < 1e-3);
}

TEST_CASE("reconstruct-project is idempotent in coefficient space") {
  std::mt19937_64 rng(9);
  Tensor env({3, 2048, 64});
  env.fill_uniform(rng, 0.0, 1.0);
  SHCoefficients once = project_to_sh(env, 2);
  SHCoefficients twice = project_to_sh(reconstruct_illum_map(once, 2048, 64), 2);
  for (int ch = 0; ch < 3; ++ch)
    for (int i = 0; i < once.per_channel(); ++i)
      CHECK(std::abs(twice.channels[ch][i] - once.channels[ch][i]) < 1e-6);
}

TEST_CASE("dominant_light_direction basics") {
  SHCoefficients c(2);
  for (int ch = 0; ch < 3; ++ch) c.channels[ch][SHCoefficients::index(1, 0)] = 0.8;
  auto d = dominant_light_direction(c);
  CHECK(d[0] == doctest::Approx(0.0));
  CHECK(d[1] == doctest::Approx(0.0));
  CHECK(d[2] == doctest::Approx(1.0));

  SHCoefficients dc(2);
  for (int ch = 0; ch < 3; ++ch) dc.channels[ch][0] = 5.0;
  CHECK_THROWS_AS(dominant_light_direction(dc), DegenerateIllumination);

  // invariance under positive scaling
  for (auto& chv : c.channels)
    for (auto& v : chv) v *= 17.0;
  auto d2 = dominant_light_direction(c);
  CHECK(angle_between(d, d2) < 1e-12);
}

TEST_CASE("point light projection recovers direction") {
  // single bright pixel at theta=pi/2, phi=0 (the +x direction)
  int H = 64, W = 128;
  Tensor env({3, H, W}, 0.0);
  int r = H / 2, c = 0;  // phi = 2*pi*0.5/W, close to 0
  for (int ch = 0; ch < 3; ++ch) env.at3(ch, r, c) = 100.0;
  SHCoefficients coeffs = project_to_sh(env, 2);
  auto d = dominant_light_direction(coeffs);
  auto want = equirect_direction(r, c, H, W);
  CHECK(angle_between(d, want) < 5.0 * kPi / 180.0);
  CHECK(angle_between(d, {1.0, 0.0, 0.0}) < 5.0 * kPi / 180.0);
}

TEST_CASE("illum_features tiling") {
  SHCoefficients c(1);
  for (int ch = 0; ch < 3; ++ch) c.channels[ch][0] = 1.0;
  Tensor f = illum_features(c, 3, 5);
  REQUIRE(f.shape == std::vector<int>{12, 3, 5});
  for (int i = 0; i < 12; ++i)
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 5; ++col) {
        double want = (i % 4 == 0) ? 1.0 : 0.0;
        CHECK(f.at3(i, r, col) == want);
      }

  // h=w=1 equals the raw vector
  std::mt19937_64 rng(3);
  SHCoefficients cr(2);
  for (auto& ch : cr.channels)
    for (auto& v : ch) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  Tensor f1 = illum_features(cr, 1, 1);
  int n = cr.per_channel();
  for (int ch = 0; ch < 3; ++ch)
    for (int i = 0; i < n; ++i) CHECK(f1[ch * n + i] == cr.channels[ch][i]);
}
