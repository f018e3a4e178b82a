#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "harmonize/tensor.hpp"

namespace harmonize {

struct DegenerateIllumination : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

// Per-colour-channel real spherical-harmonics coefficients, degree L,
// (L+1)^2 per channel, ordered (0,0),(1,-1),(1,0),(1,1),(2,-2),...
struct SHCoefficients {
  int degree = 0;
  std::array<std::vector<double>, 3> channels;

  explicit SHCoefficients(int L = 0) : degree(L) {
    if (L < 0) throw std::invalid_argument("SHCoefficients: negative degree");
    for (auto& c : channels) c.assign(static_cast<size_t>((L + 1) * (L + 1)), 0.0);
  }

  int per_channel() const { return (degree + 1) * (degree + 1); }
  int total() const { return 3 * per_channel(); }

  static int index(int l, int m) { return l * l + l + m; }
};

namespace detail {

// Associated Legendre P_l^m(x) without the Condon-Shortley phase, so that
// the real basis comes out as y_{1,1} ~ +x, y_{1,-1} ~ +y, y_{1,0} ~ +z.
inline double legendre_p(int l, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    double somx2 = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= fact * somx2;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = ((2.0 * ll - 1.0) * x * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

inline double sh_norm(int l, int m) {
  double num = (2.0 * l + 1.0);
  for (int i = l - m + 1; i <= l + m; ++i) num /= i;
  return std::sqrt(num / (4.0 * kPi));
}

}  // namespace detail

// Orthonormal real SH values at a unit direction, all bands up to L.
inline std::vector<double> sh_basis(const std::array<double, 3>& dir, int L) {
  if (L < 0) throw std::invalid_argument("sh_basis: negative degree");
  double norm2 = dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2];
  if (std::abs(norm2 - 1.0) > 2e-9) throw std::invalid_argument("sh_basis: non-unit direction");
  double ct = std::clamp(dir[2], -1.0, 1.0);
  double phi = std::atan2(dir[1], dir[0]);
  std::vector<double> out(static_cast<size_t>((L + 1) * (L + 1)));
  const double sqrt2 = std::sqrt(2.0);
  for (int l = 0; l <= L; ++l) {
    for (int m = -l; m <= l; ++m) {
      int am = std::abs(m);
      double v = detail::sh_norm(l, am) * detail::legendre_p(l, am, ct);
      if (m > 0)
        v *= sqrt2 * std::cos(am * phi);
      else if (m < 0)
        v *= sqrt2 * std::sin(am * phi);
      out[static_cast<size_t>(SHCoefficients::index(l, m))] = v;
    }
  }
  return out;
}

// Equirectangular pixel (r,c) of an [3,H,W] map -> unit direction.
// theta is polar from +z, phi the azimuth from +x towards +y.
inline std::array<double, 3> equirect_direction(int r, int c, int H, int W) {
  double theta = kPi * (r + 0.5) / H;
  double phi = 2.0 * kPi * (c + 0.5) / W;
  double st = std::sin(theta);
  return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

// Eq-style reconstruction: each pixel/channel is the coefficient-weighted sum
// of basis values at the pixel direction.
inline Tensor reconstruct_illum_map(const SHCoefficients& c, int H, int W) {
  if (H < 1 || W < 1) throw std::invalid_argument("reconstruct_illum_map: bad size");
  Tensor env({3, H, W});
  int n = c.per_channel();
  for (int r = 0; r < H; ++r) {
    for (int col = 0; col < W; ++col) {
      auto y = sh_basis(equirect_direction(r, col, H, W), c.degree);
      for (int ch = 0; ch < 3; ++ch) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += c.channels[static_cast<size_t>(ch)][static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
        env.at3(ch, r, col) = s;
      }
    }
  }
  return env;
}

// Solid-angle-weighted inner products over the equirectangular grid.
inline SHCoefficients project_to_sh(const Tensor& env, int L) {
  if (env.ndim() != 3 || env.dim(0) != 3) throw ShapeError("project_to_sh: need [3,H,W]");
  if (L < 0) throw std::invalid_argument("project_to_sh: negative degree");
  int H = env.dim(1), W = env.dim(2);
  SHCoefficients c(L);
  int n = c.per_channel();
  double cell = (kPi / H) * (2.0 * kPi / W);
  for (int r = 0; r < H; ++r) {
    double w = std::sin(kPi * (r + 0.5) / H) * cell;
    for (int col = 0; col < W; ++col) {
      auto y = sh_basis(equirect_direction(r, col, H, W), L);
      for (int ch = 0; ch < 3; ++ch) {
        double v = env.at3(ch, r, col) * w;
        for (int i = 0; i < n; ++i)
          c.channels[static_cast<size_t>(ch)][static_cast<size_t>(i)] += v * y[static_cast<size_t>(i)];
      }
    }
  }
  return c;
}

// Direction of maximal band-1 radiance of the Rec.601 luminance channel.
inline std::array<double, 3> dominant_light_direction(const SHCoefficients& c) {
  if (c.degree < 1) throw DegenerateIllumination("dominant_light_direction: no band 1");
  const double wr = 0.299, wg = 0.587, wb = 0.114;
  auto lum = [&](int i) {
    return wr * c.channels[0][static_cast<size_t>(i)] + wg * c.channels[1][static_cast<size_t>(i)] +
           wb * c.channels[2][static_cast<size_t>(i)];
  };
  double x = lum(SHCoefficients::index(1, 1));
  double y = lum(SHCoefficients::index(1, -1));
  double z = lum(SHCoefficients::index(1, 0));
  double n = std::sqrt(x * x + y * y + z * z);
  if (n <= 1e-9) throw DegenerateIllumination("dominant_light_direction: band-1 energy too small");
  return {x / n, y / n, z / n};
}

// Coefficient vector tiled over an h x w grid: [3*(L+1)^2, h, w].
inline Tensor illum_features(const SHCoefficients& c, int h, int w) {
  int n = c.per_channel();
  Tensor out({3 * n, h, w});
  for (int ch = 0; ch < 3; ++ch)
    for (int i = 0; i < n; ++i) {
      double v = c.channels[static_cast<size_t>(ch)][static_cast<size_t>(i)];
      for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col) out.at3(ch * n + i, r, col) = v;
    }
  return out;
}

inline double angle_between(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
  return std::acos(std::clamp(d / (na * nb), -1.0, 1.0));
}

}  // namespace harmonize
