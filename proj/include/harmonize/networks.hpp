#pragma once

#include <array>
#include <string>

#include "harmonize/guided_filter.hpp"
#include "harmonize/sh.hpp"
#include "harmonize/tape.hpp"

namespace harmonize {

// Micro reference architecture: 3-stage stride-2 encoder (base->2x->4x
// channels), two 3-stage upsample-conv decoders, two 4-stage critics.
// Sizes are configuration, not contract; defaults keep tests CPU-fast.
struct NetConfig {
  int local_size = 32;   // generator works at local_size^2, divisible by 8
  int global_size = 64;  // background / global composite size
  int sh_degree = 2;     // M = 3*(degree+1)^2 illumination feature channels
  int base_ch = 8;
  FilterConfig filter{4, 0.01};

  int illum_channels() const { return 3 * (sh_degree + 1) * (sh_degree + 1); }
};

struct ConvLayer {
  Tensor w;  // [Cout,Cin,k,k]
  Tensor b;  // [Cout]

  static ConvLayer make(int cout, int cin, int k, std::mt19937_64& rng, double wstd) {
    ConvLayer l{Tensor({cout, cin, k, k}), Tensor({cout})};
    l.w.fill_normal(rng, wstd);
    return l;
  }

  static ConvLayer he(int cout, int cin, int k, std::mt19937_64& rng) {
    return make(cout, cin, k, rng, std::sqrt(2.0 / (cin * k * k)));
  }
};

struct GeneratorParams {
  std::array<ConvLayer, 3> enc;         // stride-2, 6 -> c1 -> c2 -> c3
  std::array<ConvLayer, 3> shadow_dec;  // upsample-conv, (c3+M) -> c2 -> c1 -> 3
  std::array<ConvLayer, 3> tex_dec;     // upsample-conv, c3 -> c2 -> c1 -> c1
  ConvLayer proj;                       // 1x1, 3 -> c1 (content guidance projection)
  ConvLayer final;                      // 3x3, c1 -> 3

  static GeneratorParams init(const NetConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0x6e))
        ;
    int c1 = cfg.base_ch, c2 = 2 * cfg.base_ch, c3 = 4 * cfg.base_ch;
    int M = cfg.illum_channels();
    GeneratorParams p;
    p.enc = {ConvLayer::he(c1, 6, 3, rng), ConvLayer::he(c2, c1, 3, rng),
             ConvLayer::he(c3, c2, 3, rng)};
    p.shadow_dec = {ConvLayer::he(c2, c3 + M, 3, rng), ConvLayer::he(c1, c2, 3, rng),
                    ConvLayer::he(3, c1, 3, rng)};
    p.tex_dec = {ConvLayer::he(c2, c3, 3, rng), ConvLayer::he(c1, c2, 3, rng),
                 ConvLayer::he(c1, c1, 3, rng)};
    p.proj = ConvLayer::he(c1, 3, 1, rng);
    p.final = ConvLayer::he(3, c1, 3, rng);
    return p;
  }

  static GeneratorParams zeros(const NetConfig& cfg) {
    std::mt19937_64 rng(0);
    GeneratorParams p = init(cfg, 0);
    p.visit([](const std::string&, Tensor& t) { t.fill(0.0); });
    return p;
  }

  template <class F>
  void visit(F&& f) {
    const char* grp[3] = {"enc", "sdec", "tdec"};
    std::array<ConvLayer, 3>* arrs[3] = {&enc, &shadow_dec, &tex_dec};
    for (int g = 0; g < 3; ++g)
      for (int i = 0; i < 3; ++i) {
        f(std::string(grp[g]) + std::to_string(i) + ".w", (*arrs[g])[static_cast<size_t>(i)].w);
        f(std::string(grp[g]) + std::to_string(i) + ".b", (*arrs[g])[static_cast<size_t>(i)].b);
      }
    f("proj.w", proj.w);
    f("proj.b", proj.b);
    f("final.w", final.w);
    f("final.b", final.b);
  }
};

struct CriticParams {
  std::array<ConvLayer, 4> stages;

  // WGAN critic; weights start inside the clip box
  static CriticParams init(int in_ch, int base_ch, double clip_c, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0xd1));
    int c1 = base_ch, c2 = 2 * base_ch, c3 = 4 * base_ch;
    CriticParams p;
    int chans[5] = {in_ch, c1, c2, c3, c3};
    for (int i = 0; i < 4; ++i) {
      p.stages[static_cast<size_t>(i)] =
          ConvLayer{Tensor({chans[i + 1], chans[i], 3, 3}), Tensor({chans[i + 1]})};
      p.stages[static_cast<size_t>(i)].w.fill_uniform(rng, -clip_c, clip_c);
    }
    return p;
  }

  template <class F>
  void visit(F&& f) {
    for (int i = 0; i < 4; ++i) {
      f("c" + std::to_string(i) + ".w", stages[static_cast<size_t>(i)].w);
      f("c" + std::to_string(i) + ".b", stages[static_cast<size_t>(i)].b);
    }
  }

  void clip(double c) {
    visit([c](const std::string&, Tensor& t) {
      for (double& v : t.data) v = std::clamp(v, -c, c);
    });
  }

  double max_abs() {
    double m = 0.0;
    visit([&m](const std::string&, Tensor& t) {
      for (double v : t.data) m = std::max(m, std::abs(v));
    });
    return m;
  }
};

// Tape-bound parameter handles plus the flat (tensor, id) list the
// optimizer consumes. Binding order is the visit order.
struct BoundVars {
  std::vector<VarId> ids;
  std::vector<Tensor*> tensors;
  std::vector<std::string> names;
};

struct GenVars {
  std::array<std::pair<VarId, VarId>, 3> enc, sdec, tdec;
  std::pair<VarId, VarId> proj, fin;
};

inline BoundVars bind_generator(Tape& t, GeneratorParams& p, GenVars& out) {
  BoundVars b;
  std::vector<VarId> flat;
  p.visit([&](const std::string& name, Tensor& tensor) {
    VarId id = t.leaf(tensor);
    b.ids.push_back(id);
    b.tensors.push_back(&tensor);
    b.names.push_back(name);
    flat.push_back(id);
  });
  auto pair_at = [&](int i) { return std::make_pair(flat[static_cast<size_t>(2 * i)], flat[static_cast<size_t>(2 * i + 1)]); };
  for (int i = 0; i < 3; ++i) out.enc[static_cast<size_t>(i)] = pair_at(i);
  for (int i = 0; i < 3; ++i) out.sdec[static_cast<size_t>(i)] = pair_at(3 + i);
  for (int i = 0; i < 3; ++i) out.tdec[static_cast<size_t>(i)] = pair_at(6 + i);
  out.proj = pair_at(9);
  out.fin = pair_at(10);
  return b;
}

struct CriticVars {
  std::array<std::pair<VarId, VarId>, 4> stages;
};

inline BoundVars bind_critic(Tape& t, CriticParams& p, CriticVars& out) {
  BoundVars b;
  std::vector<VarId> flat;
  p.visit([&](const std::string& name, Tensor& tensor) {
    VarId id = t.leaf(tensor);
    b.ids.push_back(id);
    b.tensors.push_back(&tensor);
    b.names.push_back(name);
    flat.push_back(id);
  });
  for (int i = 0; i < 4; ++i)
    out.stages[static_cast<size_t>(i)] = {flat[static_cast<size_t>(2 * i)], flat[static_cast<size_t>(2 * i + 1)]};
  return b;
}

// Shared encoder over the channel-concatenated (background, composite) pair.
inline VarId encode(Tape& t, const GenVars& g, VarId X, VarId x) {
  const Tensor& vx = t.val(x);
  if (!t.val(X).same_shape(vx) || vx.ndim() != 3 || vx.dim(0) != 3)
    throw ShapeError("encode: need matching [3,h,w] inputs");
  if (vx.dim(1) % 8 != 0 || vx.dim(2) % 8 != 0)
    throw ShapeError("encode: spatial size must be divisible by 8");
  VarId h = concat_ch(t, X, x);
  for (int i = 0; i < 3; ++i)
    h = relu(t, conv2d(t, h, g.enc[static_cast<size_t>(i)].first, g.enc[static_cast<size_t>(i)].second, 2, 1));
  return h;
}

// Decodes concat(features, tiled illumination) to the shadow image in [-1,1].
// Foreground masking happens in compose_local, not here.
inline VarId shadow_branch(Tape& t, const GenVars& g, VarId feats, VarId illum) {
  const Tensor& vf = t.val(feats);
  const Tensor& vi = t.val(illum);
  if (vf.dim(1) != vi.dim(1) || vf.dim(2) != vi.dim(2))
    throw ShapeError("shadow_branch: illumination feature spatial mismatch");
  VarId h = concat_ch(t, feats, illum);
  for (int i = 0; i < 3; ++i) {
    h = conv2d(t, upsample2(t, h), g.sdec[static_cast<size_t>(i)].first, g.sdec[static_cast<size_t>(i)].second, 1, 1);
    h = i < 2 ? relu(t, h) : tanh_op(t, h);
  }
  return h;
}

// Style decoder -> guided feature filter (content = projected foreground,
// style = decoded feature) -> final conv, tanh-bounded.
inline VarId texture_branch(Tape& t, const GenVars& g, VarId feats, VarId fg_content,
                            const FilterConfig& cfg) {
  VarId h = feats;
  for (int i = 0; i < 3; ++i)
    h = relu(t, conv2d(t, upsample2(t, h), g.tdec[static_cast<size_t>(i)].first, g.tdec[static_cast<size_t>(i)].second, 1, 1));
  VarId content = conv2d(t, fg_content, g.proj.first, g.proj.second, 1, 0);
  if (!t.val(content).same_shape(t.val(h)))
    throw ShapeError("texture_branch: content/style resolution mismatch");
  VarId filtered = guided_filter(t, content, h, cfg);
  return tanh_op(t, conv2d(t, filtered, g.fin.first, g.fin.second, 1, 1));
}

// x_h = x_t * m_f + x_s * (1 - m_f)
inline VarId compose_local(Tape& t, VarId xs, VarId xt, VarId mf) {
  check_same_shape(t.val(xs), t.val(xt), "compose_local");
  VarId inv = add_scalar(t, scale(t, mf, -1.0), 1.0);
  return add(t, mul_mask(t, xt, mf), mul_mask(t, xs, inv));
}

// 4 stride-2 stages, activations between stages, mean-pooled scalar score.
inline VarId critic_score(Tape& t, const CriticVars& c, VarId input) {
  VarId h = input;
  for (int i = 0; i < 4; ++i) {
    h = conv2d(t, h, c.stages[static_cast<size_t>(i)].first, c.stages[static_cast<size_t>(i)].second, 2, 1);
    if (i < 3) h = leaky_relu(t, h);
  }
  return mean(t, h);
}

// Integer-factor area resampling, [C,H,W] -> [C,H/fy,W/fx].
inline Tensor resize_area(const Tensor& img, int outH, int outW) {
  if (img.ndim() != 3) throw ShapeError("resize_area: need [C,H,W]");
  int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  if (H % outH != 0 || W % outW != 0) throw ShapeError("resize_area: non-integer factor");
  int fy = H / outH, fx = W / outW;
  Tensor out({C, outH, outW});
  for (int ch = 0; ch < C; ++ch)
    for (int r = 0; r < outH; ++r)
      for (int c = 0; c < outW; ++c) {
        double s = 0.0;
        for (int u = 0; u < fy; ++u)
          for (int v = 0; v < fx; ++v) s += img.at3(ch, r * fy + u, c * fx + v);
        out.at3(ch, r, c) = s / (fy * fx);
      }
  return out;
}

}  // namespace harmonize
