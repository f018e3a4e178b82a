#pragma once

#include <random>

#include "harmonize/sh.hpp"
#include "harmonize/stm.hpp"

namespace harmonize {

// Deliberately minimal analytic scenes: flat ground with a horizon, simple
// sprite objects, one directional light plus ambient. The point is exact
// ground truth for shadows and illumination, not realism.
struct SynthConfig {
  int N = 64;              // global image size
  int n = 32;              // local patch size
  int sprite_size = 24;    // fg.png resolution
  double elev_min = 25.0 * kPi / 180.0;
  double elev_max = 65.0 * kPi / 180.0;
  double attenuation = 0.5;
  int min_distractors = 1;
  int max_distractors = 3;
  int sh_degree = 2;
  int pano_h = 32;  // resolution used to project the ground-truth panorama
  double ambient = 0.35;

  void validate() const {
    if (N < 16 || n < 8 || n > N) throw std::invalid_argument("SynthConfig: bad sizes");
    if (elev_min < 6.0 * kPi / 180.0 || elev_max > 85.0 * kPi / 180.0 || elev_min > elev_max)
      throw std::invalid_argument("SynthConfig: bad elevation range");
    if (attenuation < 0.0 || attenuation > 1.0)
      throw std::invalid_argument("SynthConfig: bad attenuation");
    if (min_distractors < 0 || max_distractors < min_distractors)
      throw std::invalid_argument("SynthConfig: bad distractor count");
  }
};

// Image-plane foreshortening of the depth component of shadow offsets.
inline constexpr double kShadowForeshorten = 0.35;
inline constexpr double kMinShadowDrop = 0.25;  // minimum |row advance| per unit height

struct ShadowShear {
  double dx;  // column shift per unit object height
  double dy;  // row shift per unit object height (signed, |dy| >= kMinShadowDrop)
};

// Shadow geometry used both by the renderer and the direction metric.
// light points TOWARD the light (z up); the shadow extends opposite the
// horizontal light component, length scaled by cot(elevation).
inline ShadowShear shadow_shear(const std::array<double, 3>& light) {
  double lz = light[2];
  double elev = std::asin(std::clamp(lz, -1.0, 1.0));
  if (elev <= 5.0 * kPi / 180.0)
    throw std::invalid_argument("shadow_shear: light too close to horizon");
  double cot = std::cos(elev) / std::sin(elev);
  double nh = std::hypot(light[0], light[1]);
  double dxn = nh > 1e-9 ? -light[0] / nh : 0.0;
  double dyn = nh > 1e-9 ? -light[1] / nh : 0.0;
  ShadowShear s{cot * dxn, kShadowForeshorten * cot * dyn};
  if (std::abs(s.dy) < kMinShadowDrop) s.dy = s.dy >= 0.0 ? kMinShadowDrop : -kMinShadowDrop;
  return s;
}

inline std::array<double, 2> shadow_axis_2d(const std::array<double, 3>& light) {
  ShadowShear s = shadow_shear(light);
  double n = std::hypot(s.dx, s.dy);
  return {s.dx / n, s.dy / n};
}

// Multiplicative darkening map for the mask's cast shadow: 1 outside,
// 1-attenuation inside, soft edges from bilinear lookup. Inverse-maps every
// target pixel through the shear so the shadow has no holes.
inline Tensor render_shadow(const Tensor& object_mask, const std::array<double, 3>& light,
                            int ground_row, double attenuation) {
  if (object_mask.ndim() != 3 || object_mask.dim(0) != 1)
    throw ShapeError("render_shadow: need [1,H,W] mask");
  ShadowShear s = shadow_shear(light);
  int H = object_mask.dim(1), W = object_mask.dim(2);
  Tensor out({1, H, W}, 1.0);
  for (int r = 0; r < H; ++r) {
    double h = (r - ground_row) / s.dy;  // object height that lands on this row
    if (h < 0.0 || h > H) continue;
    for (int c = 0; c < W; ++c) {
      double r0 = ground_row - h;
      double c0 = c - s.dx * h;
      // bilinear read of the mask, zero outside
      int ri = static_cast<int>(std::floor(r0)), ci = static_cast<int>(std::floor(c0));
      double wr = r0 - ri, wc = c0 - ci;
      auto m = [&](int rr, int cc) -> double {
        if (rr < 0 || rr >= H || cc < 0 || cc >= W) return 0.0;
        return object_mask.at3(0, rr, cc);
      };
      double cov = (1 - wr) * ((1 - wc) * m(ri, ci) + wc * m(ri, ci + 1)) +
                   wr * ((1 - wc) * m(ri + 1, ci) + wc * m(ri + 1, ci + 1));
      out.at3(0, r, c) = 1.0 - attenuation * std::clamp(cov, 0.0, 1.0);
    }
  }
  return out;
}

// Bilinear [C,H,W] resize with edge clamping (sprite rescaling, display).
inline Tensor resize_bilinear(const Tensor& img, int outH, int outW) {
  if (img.ndim() != 3) throw ShapeError("resize_bilinear: need [C,H,W]");
  if (outH < 1 || outW < 1) throw ShapeError("resize_bilinear: bad output size");
  int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  Tensor out({C, outH, outW});
  for (int r = 0; r < outH; ++r)
    for (int c = 0; c < outW; ++c) {
      double sr = (r + 0.5) * H / outH - 0.5;
      double sc = (c + 0.5) * W / outW - 0.5;
      int r0 = static_cast<int>(std::floor(sr)), c0 = static_cast<int>(std::floor(sc));
      double wr = sr - r0, wc = sc - c0;
      auto cl = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
      for (int ch = 0; ch < C; ++ch) {
        double v00 = img.at3(ch, cl(r0, H), cl(c0, W));
        double v01 = img.at3(ch, cl(r0, H), cl(c0 + 1, W));
        double v10 = img.at3(ch, cl(r0 + 1, H), cl(c0, W));
        double v11 = img.at3(ch, cl(r0 + 1, H), cl(c0 + 1, W));
        out.at3(ch, r, c) = (1 - wr) * ((1 - wc) * v00 + wc * v01) + wr * ((1 - wc) * v10 + wc * v11);
      }
    }
  return out;
}

// One training/composition instance with analytic ground truth.
struct CompositeSample {
  Tensor bg;    // [3,N,N] background (distractors and their shadows, no FG)
  Tensor fg;    // [4,s,s] RGBA sprite
  Tensor m_f;   // [1,n,n] foreground mask in the local frame
  Tensor x;     // [3,n,n] direct composite
  Tensor y;     // [3,n,n] "real" local: object plus analytic shadow
  Tensor Ygl;   // [3,N,N] "real" global
  Tensor m_Y;   // [1,N,N] embedding mask of the region
  Region region;
  SHCoefficients gt_sh{2};
  std::array<double, 3> gt_light_dir{0, 0, 1};
  double ground_row_local = 0.0;  // FG base row in the local frame
};

namespace synth_detail {

struct Shape {
  bool ellipse;
  double cx, cy, rx, ry;  // pixel coordinates
  std::array<double, 3> color;
};

inline double shape_alpha(const Shape& s, double r, double c) {
  // signed-distance-ish coverage with ~1px soft edge
  double d;
  if (s.ellipse) {
    double q = std::hypot((c - s.cx) / s.rx, (r - s.cy) / s.ry);
    d = (q - 1.0) * std::min(s.rx, s.ry);
  } else {
    double ddx = std::abs(c - s.cx) - s.rx;
    double ddy = std::abs(r - s.cy) - s.ry;
    d = std::max(ddx, ddy);
  }
  return std::clamp(0.5 - d, 0.0, 1.0);
}

inline Tensor shape_mask(const Shape& s, int H, int W) {
  Tensor m({1, H, W});
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) m.at3(0, r, c) = shape_alpha(s, r, c);
  return m;
}

inline void paint_shape(Tensor& img, const Shape& s) {
  int H = img.dim(1), W = img.dim(2);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      double a = shape_alpha(s, r, c);
      if (a <= 0.0) continue;
      for (int ch = 0; ch < 3; ++ch)
        img.at3(ch, r, c) = (1.0 - a) * img.at3(ch, r, c) + a * s.color[static_cast<size_t>(ch)];
    }
}

inline void apply_darkening(Tensor& img, const Tensor& mult, int min_row) {
  int H = img.dim(1), W = img.dim(2);
  for (int r = min_row; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      double m = mult.at3(0, r, c);
      if (m == 1.0) continue;
      for (int ch = 0; ch < 3; ++ch) {
        // darken toward -1 (black) in [-1,1] space
        double v01 = (img.at3(ch, r, c) + 1.0) * 0.5 * m;
        img.at3(ch, r, c) = v01 * 2.0 - 1.0;
      }
    }
}

}  // namespace synth_detail

// Ground-truth SH for a directional light plus ambient: projects the
// corresponding point+ambient panorama, so gt_sh is exactly what
// project_to_sh produces for this scene's illumination.
inline SHCoefficients light_to_sh(const std::array<double, 3>& dir,
                                  const std::array<double, 3>& light_color, double ambient,
                                  int degree, int pano_h) {
  int H = pano_h, W = 2 * pano_h;
  Tensor pano({3, H, W});
  const double sigma = 10.0 * kPi / 180.0;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      auto d = equirect_direction(r, c, H, W);
      double ang = angle_between(d, dir);
      double peak = 8.0 * std::exp(-0.5 * (ang / sigma) * (ang / sigma));
      for (int ch = 0; ch < 3; ++ch)
        pano.at3(ch, r, c) = ambient + peak * light_color[static_cast<size_t>(ch)];
    }
  return project_to_sh(pano, degree);
}

inline CompositeSample gen_scene(std::uint64_t seed, const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(seed, 0x5ce2e));
  auto u = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  int N = cfg.N, n = cfg.n;

  CompositeSample smp;
  smp.gt_sh = SHCoefficients(cfg.sh_degree);

  // light
  double azimuth = u(0.0, 2.0 * kPi);
  double elev = u(cfg.elev_min, cfg.elev_max);
  smp.gt_light_dir = {std::cos(elev) * std::cos(azimuth), std::cos(elev) * std::sin(azimuth),
                      std::sin(elev)};
  std::array<double, 3> light_color{u(0.85, 1.0), u(0.8, 1.0), u(0.7, 0.95)};
  smp.gt_sh = light_to_sh(smp.gt_light_dir, light_color, cfg.ambient, cfg.sh_degree, cfg.pano_h);

  // sky and ground
  int horizon = static_cast<int>(N * u(0.32, 0.45));
  std::array<double, 3> sky_top{u(-0.1, 0.3), u(0.0, 0.4), u(0.2, 0.7)};
  std::array<double, 3> sky_bot{sky_top[0] + 0.25, sky_top[1] + 0.25, sky_top[2] + 0.2};
  std::array<double, 3> ground{u(-0.35, 0.15), u(-0.3, 0.2), u(-0.45, 0.0)};
  double ground_grad = u(-0.2, 0.2);
  smp.bg = Tensor({3, N, N});
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double v;
        if (r < horizon) {
          double tt = static_cast<double>(r) / std::max(1, horizon - 1);
          v = sky_top[static_cast<size_t>(ch)] * (1 - tt) + sky_bot[static_cast<size_t>(ch)] * tt;
        } else {
          double tt = static_cast<double>(r - horizon) / std::max(1, N - 1 - horizon);
          v = ground[static_cast<size_t>(ch)] + ground_grad * tt;
        }
        smp.bg.at3(ch, r, c) = std::clamp(v, -1.0, 1.0);
      }

  // distractor objects with analytic shadows
  int nd = cfg.min_distractors +
           static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.max_distractors -
                                                               cfg.min_distractors + 1));
  std::vector<NormRect> bboxes;
  for (int i = 0; i < nd; ++i) {
    synth_detail::Shape sh;
    sh.ellipse = rng() % 2 == 0;
    double base = u(horizon + 4.0, N - 5.0);
    double hgt = u(5.0, 11.0), wid = u(2.5, 5.5);
    sh.cx = u(6.0, N - 6.0);
    sh.cy = base - 0.5 * hgt;
    sh.rx = 0.5 * wid;
    sh.ry = 0.5 * hgt;
    sh.color = {u(-0.8, 0.8), u(-0.8, 0.8), u(-0.8, 0.8)};
    Tensor mask = synth_detail::shape_mask(sh, N, N);
    Tensor mult = render_shadow(mask, smp.gt_light_dir, static_cast<int>(base), cfg.attenuation);
    synth_detail::apply_darkening(smp.bg, mult, horizon);
    synth_detail::paint_shape(smp.bg, sh);
    // bbox in normalized coords (y up)
    bboxes.push_back(NormRect{detail::px_to_nx(static_cast<int>(sh.cx - sh.rx) - 1, N),
                              detail::px_to_ny(static_cast<int>(base) + 1, N),
                              detail::px_to_nx(static_cast<int>(sh.cx + sh.rx) + 1, N),
                              detail::px_to_ny(static_cast<int>(sh.cy - sh.ry) - 1, N)});
  }

  // block the sky so the selected region sits fully on the ground
  double horizon_ny = detail::px_to_ny(horizon, N);
  std::vector<NormRect> blockers = bboxes;
  blockers.push_back(NormRect{-0.999, horizon_ny, 0.999, 0.999});

  // foreground sprite geometry, defined in the local frame
  double fg_h = u(0.45, 0.6) * n;
  double fg_w = u(0.45, 0.7) * fg_h;
  double fg_aspect = fg_w / fg_h;
  smp.region = select_region(blockers, fg_aspect, rng(), 256);

  smp.ground_row_local = 0.82 * n;
  synth_detail::Shape fg_local;
  fg_local.ellipse = rng() % 2 == 0;
  fg_local.cx = 0.5 * n;
  fg_local.cy = smp.ground_row_local - 0.5 * fg_h;
  fg_local.rx = 0.5 * fg_w;
  fg_local.ry = 0.5 * fg_h;
  fg_local.color = {u(-0.7, 0.9), u(-0.7, 0.9), u(-0.7, 0.9)};

  // sprite file content
  {
    int s = cfg.sprite_size;
    synth_detail::Shape sp = fg_local;
    double sc = static_cast<double>(s) / n;
    sp.cx = 0.5 * s;
    sp.cy = 0.5 * s;
    sp.rx *= sc;
    sp.ry *= sc;
    smp.fg = Tensor({4, s, s});
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) {
        double a = synth_detail::shape_alpha(sp, r, c);
        for (int ch = 0; ch < 3; ++ch) smp.fg.at3(ch, r, c) = fg_local.color[static_cast<size_t>(ch)];
        smp.fg.at3(3, r, c) = a * 2.0 - 1.0;  // alpha in [-1,1] file convention
      }
  }

  // local frame: mask, direct composite
  smp.m_f = synth_detail::shape_mask(fg_local, n, n);
  Homography sq2reg = estimate_homography(Region::full_square(), smp.region);
  Tensor Xloc = warp_value(smp.bg, sq2reg, n, n);
  smp.x = Tensor({3, n, n});
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        double a = smp.m_f.at3(0, r, c);
        smp.x.at3(ch, r, c) =
            (1.0 - a) * Xloc.at3(ch, r, c) + a * fg_local.color[static_cast<size_t>(ch)];
      }

  // global frame "real": same object painted into bg with its analytic shadow
  // (the region is axis-aligned, so local->global is a pure scale+offset)
  double gx0 = detail::nx_to_px(smp.region.v[0][0], N);  // TL
  double gy0 = detail::ny_to_px(smp.region.v[0][1], N);
  double gx1 = detail::nx_to_px(smp.region.v[2][0], N);  // BR
  double gy1 = detail::ny_to_px(smp.region.v[2][1], N);
  double sx = (gx1 - gx0) / n, sy = (gy1 - gy0) / n;
  synth_detail::Shape fg_gl = fg_local;
  fg_gl.cx = gx0 + (fg_local.cx + 0.5) * sx - 0.5;
  fg_gl.cy = gy0 + (fg_local.cy + 0.5) * sy - 0.5;
  fg_gl.rx = fg_local.rx * sx;
  fg_gl.ry = fg_local.ry * sy;
  double ground_row_gl = gy0 + (smp.ground_row_local + 0.5) * sy - 0.5;
  smp.Ygl = smp.bg;
  Tensor fg_mask_gl = synth_detail::shape_mask(fg_gl, N, N);
  Tensor mult = render_shadow(fg_mask_gl, smp.gt_light_dir,
                              static_cast<int>(std::lround(ground_row_gl)), cfg.attenuation);
  synth_detail::apply_darkening(smp.Ygl, mult, horizon);
  synth_detail::paint_shape(smp.Ygl, fg_gl);

  smp.m_Y = region_mask(smp.region, N, N);
  smp.y = warp_value(smp.Ygl, sq2reg, n, n);
  return smp;
}

}  // namespace harmonize
