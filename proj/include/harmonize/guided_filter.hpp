#pragma once

#include "harmonize/tape.hpp"

namespace harmonize {

struct FilterConfig {
  int radius = 4;
  double epsilon = 0.01;
};

// Guided feature filter: per window k the linear model T = a_k*C + b_k with
// (a_k, b_k) minimizing sum_i ((a_k*S_i + b_k - C_i)^2 + eps*a_k^2), then
// per-pixel averaging of the coefficients over all windows containing the
// pixel. Built from box filters and elementwise ops so it is differentiable
// w.r.t. both C and S. Channels are filtered independently.
inline VarId guided_filter(Tape& t, VarId C, VarId S, const FilterConfig& cfg) {
  check_same_shape(t.val(C), t.val(S), "guided_filter");
  if (cfg.radius < 0 || cfg.epsilon < 0.0)
    throw std::invalid_argument("guided_filter: bad config");
  int r = cfg.radius;
  VarId mu = box_filter(t, S, r);          // mean of S
  VarId cbar = box_filter(t, C, r);        // mean of C
  VarId corr = box_filter(t, mul(t, S, C), r);
  VarId var = sub(t, box_filter(t, mul(t, S, S), r), mul(t, mu, mu));
  VarId a = div_op(t, sub(t, corr, mul(t, mu, cbar)), add_scalar(t, var, cfg.epsilon));
  VarId b = sub(t, cbar, mul(t, a, mu));
  VarId abar = box_filter(t, a, r);
  VarId bbar = box_filter(t, b, r);
  return add(t, mul(t, abar, C), bbar);
}

// Plain-tensor convenience wrapper.
inline Tensor guided_filter_value(const Tensor& C, const Tensor& S, const FilterConfig& cfg) {
  Tape t;
  return t.val(guided_filter(t, t.leaf(C), t.leaf(S), cfg));
}

// Independent oracle: solves each window's regularized 2x2 normal equations
// by direct arithmetic, averages coefficients per pixel, applies the linear
// model. Test-scale only (quadratic in window size).
inline Tensor guided_filter_bruteforce(const Tensor& C, const Tensor& S, const FilterConfig& cfg) {
  check_same_shape(C, S, "guided_filter_bruteforce");
  int ch = C.ndim() == 3 ? C.dim(0) : 1;
  int H = C.ndim() == 3 ? C.dim(1) : C.dim(0);
  int W = C.ndim() == 3 ? C.dim(2) : C.dim(1);
  int r = cfg.radius;
  Tensor out(C.shape);
  for (int k = 0; k < ch; ++k) {
    const double* cp = &C.data[static_cast<size_t>(k) * H * W];
    const double* sp = &S.data[static_cast<size_t>(k) * H * W];
    double* op = &out.data[static_cast<size_t>(k) * H * W];
    std::vector<double> ak(static_cast<size_t>(H) * W), bk(static_cast<size_t>(H) * W);
    for (int row = 0; row < H; ++row) {
      for (int col = 0; col < W; ++col) {
        int r0 = std::max(row - r, 0), r1 = std::min(row + r, H - 1);
        int c0 = std::max(col - r, 0), c1 = std::min(col + r, W - 1);
        double n = 0, ss = 0, s1 = 0, sc = 0, c1sum = 0;
        for (int rr = r0; rr <= r1; ++rr)
          for (int cc = c0; cc <= c1; ++cc) {
            double sv = sp[rr * W + cc], cv = cp[rr * W + cc];
            n += 1.0;
            ss += sv * sv;
            s1 += sv;
            sc += sv * cv;
            c1sum += cv;
          }
        // [ss + n*eps, s1; s1, n] [a; b] = [sc; c1sum]
        double a11 = ss + n * cfg.epsilon, a12 = s1, a22 = n;
        double det = a11 * a22 - a12 * a12;
        double a = (sc * a22 - c1sum * a12) / det;
        double b = (c1sum * a11 - sc * a12) / det;
        ak[static_cast<size_t>(row) * W + col] = a;
        bk[static_cast<size_t>(row) * W + col] = b;
      }
    }
    for (int row = 0; row < H; ++row) {
      for (int col = 0; col < W; ++col) {
        int r0 = std::max(row - r, 0), r1 = std::min(row + r, H - 1);
        int c0 = std::max(col - r, 0), c1 = std::min(col + r, W - 1);
        double sa = 0, sb = 0, n = 0;
        for (int rr = r0; rr <= r1; ++rr)
          for (int cc = c0; cc <= c1; ++cc) {
            sa += ak[static_cast<size_t>(rr) * W + cc];
            sb += bk[static_cast<size_t>(rr) * W + cc];
            n += 1.0;
          }
        op[row * W + col] = (sa / n) * cp[row * W + col] + sb / n;
      }
    }
  }
  return out;
}

}  // namespace harmonize
