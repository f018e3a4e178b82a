#pragma once

#include <Eigen/Dense>
#include <array>
#include <random>

#include "harmonize/tape.hpp"

namespace harmonize {

struct DegenerateQuad : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoRegionFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Quadrilateral in normalized [-1,1]^2 coordinates (y up), vertices ordered
// top-left, top-right, bottom-right, bottom-left.
struct Region {
  std::array<std::array<double, 2>, 4> v;

  static Region full_square() {
    return Region{{{{-1.0, 1.0}, {1.0, 1.0}, {1.0, -1.0}, {-1.0, -1.0}}}};
  }

  static Region from_rect(double x0, double y0, double x1, double y1) {
    // (x0,y0) lower-left, (x1,y1) upper-right
    return Region{{{{x0, y1}, {x1, y1}, {x1, y0}, {x0, y0}}}};
  }

  // Strictly convex with consistent winding; coordinate range not checked
  // (the full frame square sits exactly on the boundary).
  bool valid_geometry() const {
    double sign = 0.0;
    for (int i = 0; i < 4; ++i) {
      const auto& a = v[static_cast<size_t>(i)];
      const auto& b = v[static_cast<size_t>((i + 1) % 4)];
      const auto& c = v[static_cast<size_t>((i + 2) % 4)];
      double cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
      if (std::abs(cr) < 1e-9) return false;
      if (sign == 0.0)
        sign = cr;
      else if (sign * cr < 0.0)
        return false;
    }
    return true;
  }

  // Selected-region contract: geometry plus all vertices strictly in (-1,1).
  bool valid() const {
    for (const auto& p : v)
      if (!(p[0] > -1.0 && p[0] < 1.0 && p[1] > -1.0 && p[1] < 1.0)) return false;
    return valid_geometry();
  }

  void require_valid() const {
    if (!valid_geometry()) throw DegenerateQuad("Region: degenerate quadrilateral");
  }
};

struct Homography {
  std::array<double, 9> m;  // row-major, m[8] normalized to 1

  std::array<double, 2> apply(double x, double y) const {
    double X = m[0] * x + m[1] * y + m[2];
    double Y = m[3] * x + m[4] * y + m[5];
    double Z = m[6] * x + m[7] * y + m[8];
    return {X / Z, Y / Z};
  }

  Homography inverse() const {
    Eigen::Matrix3d M;
    M << m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8];
    if (std::abs(M.determinant()) < 1e-14) throw DegenerateQuad("Homography: not invertible");
    Eigen::Matrix3d I = M.inverse();
    Homography h;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) h.m[static_cast<size_t>(3 * r + c)] = I(r, c);
    h.normalize();
    return h;
  }

  void normalize() {
    double s = m[8];
    if (std::abs(s) < 1e-14) throw DegenerateQuad("Homography: bad normalization");
    for (double& x : m) x /= s;
  }
};

// DLT from four vertex correspondences: the 8x8 linear system with h9 = 1.
inline Homography estimate_homography(const Region& src, const Region& dst) {
  src.require_valid();
  dst.require_valid();
  Eigen::Matrix<double, 8, 8> A;
  Eigen::Matrix<double, 8, 1> rhs;
  for (int i = 0; i < 4; ++i) {
    double x = src.v[static_cast<size_t>(i)][0], y = src.v[static_cast<size_t>(i)][1];
    double u = dst.v[static_cast<size_t>(i)][0], v = dst.v[static_cast<size_t>(i)][1];
    A.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    rhs(2 * i) = u;
    rhs(2 * i + 1) = v;
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(A);
  if (!lu.isInvertible()) throw DegenerateQuad("estimate_homography: collinear vertices");
  Eigen::Matrix<double, 8, 1> h = lu.solve(rhs);
  Homography H;
  for (int i = 0; i < 8; ++i) H.m[static_cast<size_t>(i)] = h(i);
  H.m[8] = 1.0;
  // conditioning guard
  Eigen::Matrix3d M;
  M << H.m[0], H.m[1], H.m[2], H.m[3], H.m[4], H.m[5], H.m[6], H.m[7], H.m[8];
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M);
  if (svd.singularValues()(2) <= 0.0 ||
      svd.singularValues()(0) / svd.singularValues()(2) > 1e8)
    throw DegenerateQuad("estimate_homography: ill-conditioned");
  return H;
}

namespace detail {

// pixel <-> normalized coordinate maps (pixel centers at half-integers, y up)
inline double px_to_nx(int c, int W) { return 2.0 * (c + 0.5) / W - 1.0; }
inline double px_to_ny(int r, int H) { return 1.0 - 2.0 * (r + 0.5) / H; }
inline double nx_to_px(double x, int W) { return (x + 1.0) * 0.5 * W - 0.5; }
inline double ny_to_px(double y, int H) { return (1.0 - y) * 0.5 * H - 0.5; }

inline double snap(double x) {
  double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

struct BilinearSample {
  int r0, c0;
  double wr, wc;  // weights toward r0+1 / c0+1
};

}  // namespace detail

// Plain-tensor inverse-mapping warp: out(p) = img(H * p) with bilinear
// sampling in normalized coordinates; samples outside the image read 0.
inline Tensor warp_value(const Tensor& img, const Homography& H, int outH, int outW) {
  if (img.ndim() != 3) throw ShapeError("warp: need [C,H,W]");
  (void)H.inverse();  // invertibility check
  int C = img.dim(0), Hi = img.dim(1), Wi = img.dim(2);
  Tensor out({C, outH, outW});
  for (int r = 0; r < outH; ++r) {
    for (int c = 0; c < outW; ++c) {
      auto [sx, sy] = H.apply(detail::px_to_nx(c, outW), detail::px_to_ny(r, outH));
      double pr = detail::snap(detail::ny_to_px(sy, Hi));
      double pc = detail::snap(detail::nx_to_px(sx, Wi));
      int r0 = static_cast<int>(std::floor(pr)), c0 = static_cast<int>(std::floor(pc));
      double wr = pr - r0, wc = pc - c0;
      for (int ch = 0; ch < C; ++ch) {
        auto sample = [&](int rr, int cc) -> double {
          if (rr < 0 || rr >= Hi || cc < 0 || cc >= Wi) return 0.0;
          return img.at3(ch, rr, cc);
        };
        double v00 = sample(r0, c0), v01 = sample(r0, c0 + 1);
        double v10 = sample(r0 + 1, c0), v11 = sample(r0 + 1, c0 + 1);
        out.at3(ch, r, c) = (1 - wr) * ((1 - wc) * v00 + wc * v01) + wr * ((1 - wc) * v10 + wc * v11);
      }
    }
  }
  return out;
}

// Tape op: differentiable w.r.t. the image (the homography is data).
inline VarId warp(Tape& t, VarId img, const Homography& H, int outH, int outW) {
  Tensor out = warp_value(t.val(img), H, outH, outW);
  return make_op(t, std::move(out), [img, H, outH, outW](Tape& tp, VarId out_id) {
    const Tensor& g = tp.grad(out_id);
    const Tensor& vi = tp.val(img);
    Tensor& gi = tp.grad(img);
    int C = vi.dim(0), Hi = vi.dim(1), Wi = vi.dim(2);
    for (int r = 0; r < outH; ++r) {
      for (int c = 0; c < outW; ++c) {
        auto [sx, sy] = H.apply(detail::px_to_nx(c, outW), detail::px_to_ny(r, outH));
        double pr = detail::snap(detail::ny_to_px(sy, Hi));
        double pc = detail::snap(detail::nx_to_px(sx, Wi));
        int r0 = static_cast<int>(std::floor(pr)), c0 = static_cast<int>(std::floor(pc));
        double wr = pr - r0, wc = pc - c0;
        for (int ch = 0; ch < C; ++ch) {
          double go = g.at3(ch, r, c);
          if (go == 0.0) continue;
          auto scatter = [&](int rr, int cc, double w) {
            if (rr < 0 || rr >= Hi || cc < 0 || cc >= Wi || w == 0.0) return;
            gi.at3(ch, rr, cc) += go * w;
          };
          scatter(r0, c0, (1 - wr) * (1 - wc));
          scatter(r0, c0 + 1, (1 - wr) * wc);
          scatter(r0 + 1, c0, wr * (1 - wc));
          scatter(r0 + 1, c0 + 1, wr * wc);
        }
      }
    }
  });
}

// Coverage mask of the region polygon at N x N, with a 1-pixel soft edge:
// 1 strictly inside, 0 strictly outside, fractional on edge pixels.
inline Tensor region_mask(const Region& region, int H, int W) {
  region.require_valid();
  // vertices in pixel coordinates
  std::array<std::array<double, 2>, 4> p;
  for (int i = 0; i < 4; ++i) {
    p[static_cast<size_t>(i)] = {detail::nx_to_px(region.v[static_cast<size_t>(i)][0], W),
                                 detail::ny_to_px(region.v[static_cast<size_t>(i)][1], H)};
  }
  // signed area for winding; make edge normals point outward
  double area = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto& a = p[static_cast<size_t>(i)];
    const auto& b = p[static_cast<size_t>((i + 1) % 4)];
    area += a[0] * b[1] - b[0] * a[1];
  }
  double orient = area > 0.0 ? 1.0 : -1.0;
  Tensor mask({1, H, W});
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      double d = -1e30;  // max over edge half-plane distances, >0 outside
      for (int i = 0; i < 4; ++i) {
        const auto& a = p[static_cast<size_t>(i)];
        const auto& b = p[static_cast<size_t>((i + 1) % 4)];
        double ex = b[0] - a[0], ey = b[1] - a[1];
        double len = std::sqrt(ex * ex + ey * ey);
        double cr = (ex * (r - a[1]) - ey * (c - a[0])) / len;
        d = std::max(d, -orient * cr);
      }
      mask.at3(0, r, c) = std::clamp(0.5 - d, 0.0, 1.0);
    }
  }
  return mask;
}

// Warps the local patch back into the background through the inverse
// homography and blends with the soft region mask:
//   global = warp(local) * mask + background * (1 - mask).
// Background is bit-preserved wherever the mask is exactly 0.
struct GlobalComposite {
  VarId global;
  Tensor warp_mask;  // [1,N,N]
};

inline GlobalComposite inverse_warp_compose(Tape& t, VarId background, VarId local,
                                            const Region& region) {
  if (t.val(background).ndim() != 3)
    throw ShapeError("inverse_warp_compose: need [C,N,N] background");
  // copy extents now: pushing ops below may reallocate the tape
  int N = t.val(background).dim(1);
  int W = t.val(background).dim(2);
  Homography g2l = estimate_homography(region, Region::full_square());
  VarId warped = warp(t, local, g2l, N, W);
  Tensor mask = region_mask(region, N, W);
  Tensor inv_mask = mask;
  for (double& v : inv_mask.data) v = 1.0 - v;
  VarId m = t.leaf(mask);
  VarId im = t.leaf(inv_mask);
  VarId global = add(t, mul_mask(t, warped, m), mul_mask(t, background, im));
  return {global, std::move(mask)};
}

// Axis-aligned rectangle in normalized coordinates, (x0,y0) lower-left.
struct NormRect {
  double x0, y0, x1, y1;
  bool overlaps(const NormRect& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
};

// Picks an axis-aligned region adjacent to a randomly chosen bbox, matching
// the foreground aspect (width/height) within 10%, overlapping no bbox.
// Deterministic per seed; throws NoRegionFound after max_attempts.
inline Region select_region(const std::vector<NormRect>& bboxes, double fg_aspect,
                            std::uint64_t rng_seed, int max_attempts = 64) {
  std::mt19937_64 rng(mix_seed(rng_seed, 0x5e1ec7));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    double h, w, cx, cy;
    if (bboxes.empty()) {
      h = 0.3 + 0.5 * u01(rng);
      w = h * fg_aspect * (0.95 + 0.1 * u01(rng));
      cx = -0.5 + u01(rng);
      cy = -0.5 + u01(rng);
    } else {
      const NormRect& anchor = bboxes[static_cast<size_t>(rng() % bboxes.size())];
      double ah = anchor.y1 - anchor.y0;
      h = ah * (0.9 + 0.6 * u01(rng));
      w = h * fg_aspect * (0.95 + 0.1 * u01(rng));
      double gap = 0.01 + 0.08 * u01(rng);
      int side = static_cast<int>(rng() % 4);
      double ax = 0.5 * (anchor.x0 + anchor.x1);
      cy = anchor.y0 + 0.5 * h;  // share the ground line with the anchor
      cx = ax;
      switch (side) {
        case 0: cx = anchor.x0 - gap - 0.5 * w; break;          // left
        case 1: cx = anchor.x1 + gap + 0.5 * w; break;          // right
        case 2: cy = anchor.y1 + gap + 0.5 * h; cx = ax; break; // above
        default: cy = anchor.y0 - gap - 0.5 * h; cx = ax; break;
      }
    }
    NormRect cand{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
    const double margin = 1e-3;
    if (cand.x0 <= -1.0 + margin || cand.y0 <= -1.0 + margin || cand.x1 >= 1.0 - margin ||
        cand.y1 >= 1.0 - margin)
      continue;
    bool clash = false;
    for (const auto& b : bboxes)
      if (cand.overlaps(b)) {
        clash = true;
        break;
      }
    if (clash) continue;
    Region reg = Region::from_rect(cand.x0, cand.y0, cand.x1, cand.y1);
    if (reg.valid()) return reg;
  }
  throw NoRegionFound("select_region: no non-overlapping region found");
}

}  // namespace harmonize
