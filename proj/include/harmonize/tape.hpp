#pragma once

#include <cassert>
#include <functional>
#include <memory>
#include <utility>

#include "harmonize/tensor.hpp"

namespace harmonize {

// Reverse-mode autodiff on an explicit tape. Each op records the VJP it needs
// as a closure over node ids; backward() walks the tape once in reverse.
// Tapes are single-threaded; parallelism happens across independent tapes.
using VarId = int;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  VarId leaf(Tensor v) { return push(std::move(v), nullptr); }

  VarId push(Tensor v, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{std::move(v), Tensor{}, std::move(back)});
    return static_cast<VarId>(nodes_.size()) - 1;
  }

  const Tensor& val(VarId id) const { return nodes_[static_cast<size_t>(id)].value; }

  // Gradient buffer, allocated on first touch.
  Tensor& grad(VarId id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
  }

  bool has_grad(VarId id) const { return !nodes_[static_cast<size_t>(id)].grad.data.empty(); }

  void backward(VarId root) {
    if (val(root).size() != 1) throw ShapeError("backward: root must be scalar");
    grad(root)[0] = 1.0;
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.back && !n.grad.data.empty()) n.back(*this);
    }
  }

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;
};

// ---- elementwise ----

// Ops cannot capture their own node id before pushing, so make_op patches the
// id into the closure after the push.
template <class F>
inline VarId make_op(Tape& t, Tensor out, F&& vjp) {
  // vjp(Tape&, VarId out_id)
  struct Holder {
    std::decay_t<F> f;
    VarId out_id = -1;
  };
  auto h = std::make_shared<Holder>(Holder{std::forward<F>(vjp), -1});
  VarId id = t.push(std::move(out), [h](Tape& tp) { h->f(tp, h->out_id); });
  h->out_id = id;
  return id;
}

inline VarId add(Tape& t, VarId a, VarId b) {
  check_same_shape(t.val(a), t.val(b), "add");
  return make_op(t, t.val(a) + t.val(b), [a, b](Tape& tp, VarId out) {
    const Tensor& g = tp.grad(out);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

inline VarId sub(Tape& t, VarId a, VarId b) {
  check_same_shape(t.val(a), t.val(b), "sub");
  return make_op(t, t.val(a) - t.val(b), [a, b](Tape& tp, VarId out) {
    const Tensor& g = tp.grad(out);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

inline VarId mul(Tape& t, VarId a, VarId b) {
  check_same_shape(t.val(a), t.val(b), "mul");
  Tensor out = t.val(a);
  for (int i = 0; i < out.size(); ++i) out[i] *= t.val(b)[i];
  return make_op(t, std::move(out), [a, b](Tape& tp, VarId out_id) {
    const Tensor& g = tp.grad(out_id);
    const Tensor& va = tp.val(a);
    const Tensor& vb = tp.val(b);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * vb[i];
      gb[i] += g[i] * va[i];
    }
  });
}

inline VarId div_op(Tape& t, VarId a, VarId b) {
  check_same_shape(t.val(a), t.val(b), "div");
  Tensor out = t.val(a);
  for (int i = 0; i < out.size(); ++i) out[i] /= t.val(b)[i];
  return make_op(t, std::move(out), [a, b](Tape& tp, VarId out_id) {
    const Tensor& g = tp.grad(out_id);
    const Tensor& va = tp.val(a);
    const Tensor& vb = tp.val(b);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int i = 0; i < g.size(); ++i) {
      double inv = 1.0 / vb[i];
      ga[i] += g[i] * inv;
      gb[i] -= g[i] * va[i] * inv * inv;
    }
  });
}

inline VarId scale(Tape& t, VarId a, double s) {
  return make_op(t, t.val(a) * s, [a, s](Tape& tp, VarId out) {
    const Tensor& g = tp.grad(out);
    Tensor& ga = tp.grad(a);
    for (int i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

inline VarId neg(Tape& t, VarId a) { return scale(t, a, -1.0); }

inline VarId add_scalar(Tape& t, VarId a, double c) {
  Tensor out = t.val(a);
  for (double& v : out.data) v += c;
  return make_op(t, std::move(out), [a](Tape& tp, VarId out_id) {
    const Tensor& g = tp.grad(out_id);
    Tensor& ga = tp.grad(a);
    for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

inline VarId relu(Tape& t, VarId a) {
  Tensor out = t.val(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return make_op(t, std::move(out), [a](Tape& tp, VarId out_id) {
    const Tensor& g = tp.grad(out_id);
    const Tensor& va = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (int i = 0; i < g.size(); ++i)
      if (va[i] > 0.0) ga[i] += g[i];
  });
}

inline VarId leaky_relu(Tape& t, VarId a, double slope = 0.2) {
  Tensor out = t.val(a);
  for (double& v : out.data) v = v > 0.0 ? v : slope * v;
  return make_op(t, std::move(out), [a, slope](Tape& tp, VarId out_id) {
    const Tensor& g = tp.grad(out_id);
    const Tensor& va = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (int i = 0; i < g.size(); ++i) ga[i] += (va[i] > 0.0 ? 1.0 : slope) * g[i];
  });
}

inline VarId tanh_op(Tape& t, VarId a) {
  Tensor out = t.val(a);
  for (double& v : out.data) v = std::tanh(v);
  return make_op(t, std::move(out), [a](Tape& tp, VarId out_id) {
    const Tensor& g = tp.grad(out_id);
    const Tensor& vo = tp.val(out_id);
    Tensor& ga = tp.grad(a);
    for (int i = 0; i < g.size(); ++i) ga[i] += (1.0 - vo[i] * vo[i]) * g[i];
  });
}

// [Ca,H,W] ++ [Cb,H,W] -> [Ca+Cb,H,W]
inline VarId concat_ch(Tape& t, VarId a, VarId b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  if (va.ndim() != 3 || vb.ndim() != 3 || va.dim(1) != vb.dim(1) || va.dim(2) != vb.dim(2))
    throw ShapeError("concat_ch: spatial mismatch");
  Tensor out({va.dim(0) + vb.dim(0), va.dim(1), va.dim(2)});
  std::copy(va.data.begin(), va.data.end(), out.data.begin());
  std::copy(vb.data.begin(), vb.data.end(), out.data.begin() + va.size());
  int na = va.size();
  return make_op(t, std::move(out), [a, b, na](Tape& tp, VarId out_id) {
    const Tensor& g = tp.grad(out_id);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int i = 0; i < na; ++i) ga[i] += g[i];
    for (int i = na; i < g.size(); ++i) gb[i - na] += g[i];
  });
}

// img [C,H,W] * mask [1,H,W], broadcast over channels.
inline VarId mul_mask(Tape& t, VarId img, VarId mask) {
  const Tensor& vi = t.val(img);
  const Tensor& vm = t.val(mask);
  if (vi.ndim() != 3 || vm.ndim() != 3 || vm.dim(0) != 1 || vi.dim(1) != vm.dim(1) ||
      vi.dim(2) != vm.dim(2))
    throw ShapeError("mul_mask: shape mismatch");
  Tensor out = vi;
  int hw = vi.dim(1) * vi.dim(2);
  for (int c = 0; c < vi.dim(0); ++c)
    for (int i = 0; i < hw; ++i) out[c * hw + i] *= vm[i];
  return make_op(t, std::move(out), [img, mask, hw](Tape& tp, VarId out_id) {
    const Tensor& g = tp.grad(out_id);
    const Tensor& vi = tp.val(img);
    const Tensor& vm = tp.val(mask);
    Tensor& gi = tp.grad(img);
    Tensor& gm = tp.grad(mask);
    int C = vi.dim(0);
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < hw; ++i) {
        gi[c * hw + i] += g[c * hw + i] * vm[i];
        gm[i] += g[c * hw + i] * vi[c * hw + i];
      }
  });
}

// ---- reductions ----

inline VarId mean(Tape& t, VarId a) {
  const Tensor& va = t.val(a);
  Tensor out({1});
  out[0] = va.mean();
  int n = va.size();
  return make_op(t, std::move(out), [a, n](Tape& tp, VarId out_id) {
    double g = tp.grad(out_id)[0] / n;
    Tensor& ga = tp.grad(a);
    for (int i = 0; i < n; ++i) ga[i] += g;
  });
}

inline VarId mean_abs(Tape& t, VarId a) {
  const Tensor& va = t.val(a);
  Tensor out({1});
  double s = 0.0;
  for (double v : va.data) s += std::abs(v);
  out[0] = s / va.size();
  int n = va.size();
  return make_op(t, std::move(out), [a, n](Tape& tp, VarId out_id) {
    double g = tp.grad(out_id)[0] / n;
    const Tensor& va = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (int i = 0; i < n; ++i) ga[i] += g * (va[i] > 0.0 ? 1.0 : (va[i] < 0.0 ? -1.0 : 0.0));
  });
}

// ---- convolution ----

namespace detail {

inline void conv2d_shapes(const Tensor& in, const Tensor& k, int stride, int pad, int& Ho,
                          int& Wo) {
  if (in.ndim() != 3 || k.ndim() != 4) throw ShapeError("conv2d: need [C,H,W] and [O,C,kh,kw]");
  if (in.dim(0) != k.dim(1)) throw ShapeError("conv2d: input channel mismatch");
  if (stride < 1) throw ShapeError("conv2d: non-positive stride");
  int H = in.dim(1), W = in.dim(2), kh = k.dim(2), kw = k.dim(3);
  if (kh > H + 2 * pad || kw > W + 2 * pad) throw ShapeError("conv2d: kernel larger than input");
  Ho = (H + 2 * pad - kh) / stride + 1;
  Wo = (W + 2 * pad - kw) / stride + 1;
}

}  // namespace detail

// Correlation (no kernel flip), zero padding. bias may be -1 for none.
inline VarId conv2d(Tape& t, VarId input, VarId kernel, VarId bias, int stride, int pad) {
  const Tensor& in = t.val(input);
  const Tensor& k = t.val(kernel);
  int Ho, Wo;
  detail::conv2d_shapes(in, k, stride, pad, Ho, Wo);
  int Ci = in.dim(0), H = in.dim(1), W = in.dim(2);
  int Co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  if (bias >= 0 && (t.val(bias).ndim() != 1 || t.val(bias).dim(0) != Co))
    throw ShapeError("conv2d: bias shape");

  Tensor out({Co, Ho, Wo});
  for (int o = 0; o < Co; ++o) {
    double b = bias >= 0 ? t.val(bias)[o] : 0.0;
    for (int r = 0; r < Ho; ++r) {
      for (int c = 0; c < Wo; ++c) {
        double acc = b;
        int r0 = r * stride - pad, c0 = c * stride - pad;
        for (int ci = 0; ci < Ci; ++ci) {
          const double* ip = &in.data[static_cast<size_t>(ci) * H * W];
          const double* kp = &k.data[(static_cast<size_t>(o) * Ci + ci) * kh * kw];
          for (int u = 0; u < kh; ++u) {
            int rr = r0 + u;
            if (rr < 0 || rr >= H) continue;
            const double* irow = ip + static_cast<size_t>(rr) * W;
            const double* krow = kp + static_cast<size_t>(u) * kw;
            for (int v = 0; v < kw; ++v) {
              int cc = c0 + v;
              if (cc < 0 || cc >= W) continue;
              acc += irow[cc] * krow[v];
            }
          }
        }
        out.at3(o, r, c) = acc;
      }
    }
  }

  return make_op(t, std::move(out),
                 [input, kernel, bias, stride, pad](Tape& tp, VarId out_id) {
    const Tensor& g = tp.grad(out_id);
    const Tensor& in = tp.val(input);
    const Tensor& k = tp.val(kernel);
    Tensor& gin = tp.grad(input);
    Tensor& gk = tp.grad(kernel);
    int Ci = in.dim(0), H = in.dim(1), W = in.dim(2);
    int Co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    int Ho = g.dim(1), Wo = g.dim(2);
    for (int o = 0; o < Co; ++o) {
      for (int r = 0; r < Ho; ++r) {
        for (int c = 0; c < Wo; ++c) {
          double go = g.at3(o, r, c);
          if (go == 0.0) continue;
          int r0 = r * stride - pad, c0 = c * stride - pad;
          for (int ci = 0; ci < Ci; ++ci) {
            double* gip = &gin.data[static_cast<size_t>(ci) * H * W];
            const double* ip = &in.data[static_cast<size_t>(ci) * H * W];
            const double* kp = &k.data[(static_cast<size_t>(o) * Ci + ci) * kh * kw];
            double* gkp = &gk.data[(static_cast<size_t>(o) * Ci + ci) * kh * kw];
            for (int u = 0; u < kh; ++u) {
              int rr = r0 + u;
              if (rr < 0 || rr >= H) continue;
              for (int v = 0; v < kw; ++v) {
                int cc = c0 + v;
                if (cc < 0 || cc >= W) continue;
                gip[rr * W + cc] += go * kp[u * kw + v];
                gkp[u * kw + v] += go * ip[rr * W + cc];
              }
            }
          }
        }
      }
    }
    if (bias >= 0) {
      Tensor& gb = tp.grad(bias);
      for (int o = 0; o < Co; ++o) {
        double s = 0.0;
        for (int r = 0; r < Ho; ++r)
          for (int c = 0; c < Wo; ++c) s += g.at3(o, r, c);
        gb[o] += s;
      }
    }
  });
}

// Nearest-neighbour 2x upsampling, [C,H,W] -> [C,2H,2W].
inline VarId upsample2(Tape& t, VarId a) {
  const Tensor& va = t.val(a);
  if (va.ndim() != 3) throw ShapeError("upsample2: need [C,H,W]");
  int C = va.dim(0), H = va.dim(1), W = va.dim(2);
  Tensor out({C, 2 * H, 2 * W});
  for (int ch = 0; ch < C; ++ch)
    for (int r = 0; r < 2 * H; ++r)
      for (int c = 0; c < 2 * W; ++c) out.at3(ch, r, c) = va.at3(ch, r / 2, c / 2);
  return make_op(t, std::move(out), [a, C, H, W](Tape& tp, VarId out_id) {
    const Tensor& g = tp.grad(out_id);
    Tensor& ga = tp.grad(a);
    for (int ch = 0; ch < C; ++ch)
      for (int r = 0; r < 2 * H; ++r)
        for (int c = 0; c < 2 * W; ++c) ga.at3(ch, r / 2, c / 2) += g.at3(ch, r, c);
  });
}

// ---- box filter ----

namespace detail {

// Clipped sliding-window sum over one [H,W] plane via running column sums.
inline void box_sum_plane(const double* in, double* out, int H, int W, int r) {
  std::vector<double> col(static_cast<size_t>(W));  // vertical window sums per column
  std::vector<double> rowacc(static_cast<size_t>(W));
  for (int c = 0; c < W; ++c) {
    double s = 0.0;
    for (int rr = 0; rr <= std::min(r, H - 1); ++rr) s += in[rr * W + c];
    col[static_cast<size_t>(c)] = s;
  }
  for (int row = 0; row < H; ++row) {
    if (row > 0) {
      int addr = row + r, subr = row - r - 1;
      for (int c = 0; c < W; ++c) {
        double s = col[static_cast<size_t>(c)];
        if (addr < H) s += in[addr * W + c];
        if (subr >= 0) s -= in[subr * W + c];
        col[static_cast<size_t>(c)] = s;
      }
    }
    // horizontal pass over col
    double s = 0.0;
    for (int c = 0; c <= std::min(r, W - 1); ++c) s += col[static_cast<size_t>(c)];
    for (int c = 0; c < W; ++c) {
      if (c > 0) {
        int addc = c + r, subc = c - r - 1;
        if (addc < W) s += col[static_cast<size_t>(addc)];
        if (subc >= 0) s -= col[static_cast<size_t>(subc)];
      }
      rowacc[static_cast<size_t>(c)] = s;
    }
    for (int c = 0; c < W; ++c) out[row * W + c] = rowacc[static_cast<size_t>(c)];
  }
}

inline int box_count(int H, int W, int r, int row, int c) {
  int h = std::min(row + r, H - 1) - std::max(row - r, 0) + 1;
  int w = std::min(c + r, W - 1) - std::max(c - r, 0) + 1;
  return h * w;
}

inline void box_check(const Tensor& t, int radius) {
  if (t.ndim() != 2 && t.ndim() != 3) throw ShapeError("box_filter: need [H,W] or [C,H,W]");
  if (radius < 0) throw ShapeError("box_filter: negative radius");
  int H = t.ndim() == 2 ? t.dim(0) : t.dim(1);
  int W = t.ndim() == 2 ? t.dim(1) : t.dim(2);
  if (radius > H && radius > W) throw ShapeError("box_filter: radius exceeds both extents");
}

}  // namespace detail

// Mean over the clipped (2r+1)^2 window, normalized by actual window size.
// Non-tape version; the tape op wraps it.
inline Tensor box_filter_value(const Tensor& t, int radius) {
  detail::box_check(t, radius);
  if (radius == 0) return t;
  int C = t.ndim() == 2 ? 1 : t.dim(0);
  int H = t.ndim() == 2 ? t.dim(0) : t.dim(1);
  int W = t.ndim() == 2 ? t.dim(1) : t.dim(2);
  Tensor out(t.shape);
  for (int ch = 0; ch < C; ++ch) {
    const double* ip = &t.data[static_cast<size_t>(ch) * H * W];
    double* op = &out.data[static_cast<size_t>(ch) * H * W];
    detail::box_sum_plane(ip, op, H, W, radius);
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) op[r * W + c] /= detail::box_count(H, W, radius, r, c);
  }
  return out;
}

// Adjoint of box_filter_value: clipped box *sum* of g/n.
inline Tensor box_filter_adjoint(const Tensor& g, int radius) {
  if (radius == 0) return g;
  int C = g.ndim() == 2 ? 1 : g.dim(0);
  int H = g.ndim() == 2 ? g.dim(0) : g.dim(1);
  int W = g.ndim() == 2 ? g.dim(1) : g.dim(2);
  Tensor u = g;
  for (int ch = 0; ch < C; ++ch) {
    double* up = &u.data[static_cast<size_t>(ch) * H * W];
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) up[r * W + c] /= detail::box_count(H, W, radius, r, c);
  }
  Tensor out(g.shape);
  for (int ch = 0; ch < C; ++ch)
    detail::box_sum_plane(&u.data[static_cast<size_t>(ch) * H * W],
                          &out.data[static_cast<size_t>(ch) * H * W], H, W, radius);
  return out;
}

inline VarId box_filter(Tape& t, VarId a, int radius) {
  Tensor out = box_filter_value(t.val(a), radius);
  return make_op(t, std::move(out), [a, radius](Tape& tp, VarId out_id) {
    Tensor gin = box_filter_adjoint(tp.grad(out_id), radius);
    Tensor& ga = tp.grad(a);
    for (int i = 0; i < gin.size(); ++i) ga[i] += gin[i];
  });
}

// ---- gradient checking ----

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
};

// Compares the tape gradient of a scalar function against central differences,
// coordinate by coordinate. Relative error uses an absolute floor of 1e-8 in
// the denominator. Non-finite values report failure rather than throwing.
inline GradCheckReport grad_check(const std::function<VarId(Tape&, VarId)>& f, const Tensor& x,
                                  double step, double tol) {
  GradCheckReport rep;
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
  Tensor analytic;
  {
    Tape t;
    VarId xid = t.leaf(x);
    VarId y = f(t, xid);
    if (t.val(y).size() != 1 || !std::isfinite(t.val(y)[0])) return rep;
    t.backward(y);
    analytic = t.grad(xid);
  }
  auto eval = [&](const Tensor& p) -> double {
    Tape t;
    VarId y = f(t, t.leaf(p));
    return t.val(y)[0];
  };
  Tensor p = x;
  for (int i = 0; i < x.size(); ++i) {
    double orig = p[i];
    p[i] = orig + step;
    double fp = eval(p);
    p[i] = orig - step;
    double fm = eval(p);
    p[i] = orig;
    double num = (fp - fm) / (2.0 * step);
    if (!std::isfinite(num) || !std::isfinite(analytic[i])) return rep;
    double denom = std::max({std::abs(num), std::abs(analytic[i]), 1e-8});
    rep.max_rel_err = std::max(rep.max_rel_err, std::abs(num - analytic[i]) / denom);
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace harmonize
