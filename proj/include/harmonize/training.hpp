#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "harmonize/networks.hpp"
#include "harmonize/serialize.hpp"
#include "harmonize/synth.hpp"

namespace harmonize {

// ---- losses ----

struct LossWeights {
  double lambda_G = 1.0;
  double lambda_G_idt = 5.0;
  double lambda_D_G = 1.0;
  double clip_c = 0.01;
  int d_steps_per_g = 5;

  void validate() const {
    if (lambda_G < 0 || lambda_G_idt < 0 || lambda_D_G < 0 || clip_c <= 0 || d_steps_per_g < 1)
      throw std::invalid_argument("LossWeights: weights must be >= 0, clip_c > 0");
  }
};

inline double batch_mean(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty batch");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// (L_D_L, L_G_L) = (E[D(fake)] - E[D(real)], -E[D(fake)])
inline std::pair<double, double> local_adv_losses(const std::vector<double>& d_fake,
                                                  const std::vector<double>& d_real) {
  double mf = batch_mean(d_fake, "local_adv_losses");
  double mr = batch_mean(d_real, "local_adv_losses");
  return {mf - mr, -mf};
}

inline std::pair<double, double> global_adv_losses(const std::vector<double>& d_fake,
                                                   const std::vector<double>& d_real) {
  double mf = batch_mean(d_fake, "global_adv_losses");
  double mr = batch_mean(d_real, "global_adv_losses");
  return {mf - mr, -mf};
}

inline double identity_loss(const Tensor& g_out_on_real, const Tensor& y) {
  check_same_shape(g_out_on_real, y, "identity_loss");
  double s = 0.0;
  for (size_t i = 0; i < y.size(); ++i) s += std::abs(g_out_on_real.data[i] - y.data[i]);
  return s / static_cast<double>(y.size());
}

struct LossParts {
  double L_D_L = 0, L_G_L = 0, L_D_G = 0, L_G_G = 0, L_S_idt = 0;
};

// (L_G, L_D)
inline std::pair<double, double> total_losses(const LossParts& p, const LossWeights& w) {
  double vals[5] = {p.L_D_L, p.L_G_L, p.L_D_G, p.L_G_G, p.L_S_idt};
  for (double v : vals)
    if (!std::isfinite(v)) throw NumericalError("total_losses: non-finite loss part");
  double lg = p.L_G_L + w.lambda_G * p.L_G_G + w.lambda_G_idt * p.L_S_idt;
  double ld = p.L_D_L + w.lambda_D_G * p.L_D_G;
  return {lg, ld};
}

// ---- optimizer: adaptive per-parameter rate with decay accumulators ----

struct Adadelta {
  double rho = 0.95;
  double eps = 1e-6;
  double lr = 1.0;
  std::vector<Tensor> eg2, edx2;

  void init(const std::vector<Tensor*>& params) {
    eg2.clear();
    edx2.clear();
    for (const Tensor* p : params) {
      eg2.emplace_back(p->shape);
      edx2.emplace_back(p->shape);
    }
  }

  void apply(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size() || params.size() != eg2.size())
      throw ShapeError("Adadelta: parameter/gradient count mismatch");
    for (size_t j = 0; j < params.size(); ++j) {
      Tensor& p = *params[j];
      const Tensor& g = grads[j];
      check_same_shape(p, g, "Adadelta");
      for (size_t i = 0; i < p.size(); ++i) {
        double gi = g.data[i];
        eg2[j].data[i] = rho * eg2[j].data[i] + (1.0 - rho) * gi * gi;
        double dx = -std::sqrt((edx2[j].data[i] + eps) / (eg2[j].data[i] + eps)) * gi * lr;
        edx2[j].data[i] = rho * edx2[j].data[i] + (1.0 - rho) * dx * dx;
        p.data[i] += dx;
      }
    }
  }
};

// ---- configuration ----

struct TrainConfig {
  NetConfig net;
  LossWeights w;
  int steps = 200;
  int batch = 4;
  double lr = 1.0;
  std::uint64_t seed = 1;
  int threads = 8;

  void validate() const {
    w.validate();
    if (steps < 0 || batch < 1 || threads < 1 || lr < 0)
      throw std::invalid_argument("TrainConfig: bad steps/batch/threads/lr");
    if (net.local_size % 8 != 0 || net.local_size < 8 || net.global_size < net.local_size)
      throw std::invalid_argument("TrainConfig: bad network sizes");
  }
};

// Single flat key space shared by config files and --set overrides.
inline void apply_config_kv(TrainConfig& c, const std::string& key, const json& v) {
  if (key == "local_size") c.net.local_size = v.get<int>();
  else if (key == "global_size") c.net.global_size = v.get<int>();
  else if (key == "sh_degree") c.net.sh_degree = v.get<int>();
  else if (key == "base_ch") c.net.base_ch = v.get<int>();
  else if (key == "filter_radius") c.net.filter.radius = v.get<int>();
  else if (key == "filter_epsilon") c.net.filter.epsilon = v.get<double>();
  else if (key == "lambda_G") c.w.lambda_G = v.get<double>();
  else if (key == "lambda_G_idt") c.w.lambda_G_idt = v.get<double>();
  else if (key == "lambda_D_G") c.w.lambda_D_G = v.get<double>();
  else if (key == "clip_c") c.w.clip_c = v.get<double>();
  else if (key == "d_steps_per_g") c.w.d_steps_per_g = v.get<int>();
  else if (key == "steps") c.steps = v.get<int>();
  else if (key == "batch") c.batch = v.get<int>();
  else if (key == "lr") c.lr = v.get<double>();
  else if (key == "seed") c.seed = v.get<std::uint64_t>();
  else if (key == "threads") c.threads = v.get<int>();
  else throw std::invalid_argument("unknown config key: " + key);
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) apply_config_kv(c, it.key(), it.value());
  c.validate();
  return c;
}

inline json train_config_to_json(const TrainConfig& c) {
  return json{{"local_size", c.net.local_size}, {"global_size", c.net.global_size},
              {"sh_degree", c.net.sh_degree},   {"base_ch", c.net.base_ch},
              {"filter_radius", c.net.filter.radius}, {"filter_epsilon", c.net.filter.epsilon},
              {"lambda_G", c.w.lambda_G},       {"lambda_G_idt", c.w.lambda_G_idt},
              {"lambda_D_G", c.w.lambda_D_G},   {"clip_c", c.w.clip_c},
              {"d_steps_per_g", c.w.d_steps_per_g}, {"steps", c.steps},
              {"batch", c.batch},               {"lr", c.lr},
              {"seed", c.seed},                 {"threads", c.threads}};
}

// ---- samples as the trainer consumes them ----

struct TrainingSample {
  Tensor bg;           // [3,N,N]
  Tensor x, y;         // [3,n,n]
  Tensor Ygl;          // [3,N,N]
  Tensor m_f;          // [1,n,n]
  Tensor m_Y;          // [1,N,N]
  Region region;
  SHCoefficients sh{2};
  // precomputed, derived from the above
  Tensor Xloc;         // [3,n,n] warped background region (generator input X)
  Tensor illum_feat;   // [M,n/8,n/8] conditioning for the shadow branch
  Tensor illum_local;  // [3,n,n] reconstructed illumination, local critic input
};

inline void finalize_sample(TrainingSample& s, const NetConfig& cfg) {
  if (s.sh.degree != cfg.sh_degree)
    throw std::invalid_argument("sample SH degree does not match network config");
  int n = cfg.local_size;
  if (s.x.dim(1) != n || s.bg.dim(1) != cfg.global_size)
    throw std::invalid_argument("sample resolution does not match network config");
  Homography sq2reg = estimate_homography(Region::full_square(), s.region);
  s.Xloc = warp_value(s.bg, sq2reg, n, n);
  s.illum_feat = illum_features(s.sh, n / 8, n / 8);
  Tensor pano = reconstruct_illum_map(s.sh, n, 2 * n);
  s.illum_local = resize_area(pano, n, n);
  for (double& v : s.illum_local.data) v = std::tanh(v);  // bound like image inputs
}

inline TrainingSample prepare_sample(const CompositeSample& c, const NetConfig& cfg) {
  TrainingSample s;
  s.bg = c.bg;
  s.x = c.x;
  s.y = c.y;
  s.Ygl = c.Ygl;
  s.m_f = c.m_f;
  s.m_Y = c.m_Y;
  s.region = c.region;
  s.sh = c.gt_sh;
  finalize_sample(s, cfg);
  return s;
}

// ---- generator forward ----

struct GenOut {
  VarId feats, x_s, x_t, x_h;
};

inline GenOut generator_forward(Tape& t, const GenVars& g, const NetConfig& cfg, VarId X, VarId x,
                                VarId mf, const Tensor& illum_feat) {
  VarId feats = encode(t, g, X, x);
  VarId ill = t.leaf(illum_feat);
  VarId xs = shadow_branch(t, g, feats, ill);
  VarId fg_content = mul_mask(t, x, mf);
  VarId xt = texture_branch(t, g, feats, fg_content, cfg.filter);
  VarId xh = compose_local(t, xs, xt, mf);
  return {feats, xs, xt, xh};
}

// Value-only forward used for detached critic updates, evaluation and the
// compose tool: local output plus the global composite.
struct GenEval {
  Tensor x_h;         // [3,n,n]
  Tensor x_h_global;  // [3,N,N]
  Tensor warp_mask;   // [1,N,N] mask actually used by inverse_warp_compose
};

inline GenEval run_generator(GeneratorParams& G, const NetConfig& cfg, const TrainingSample& s) {
  Tape t;
  GenVars gv;
  bind_generator(t, G, gv);
  VarId X = t.leaf(s.Xloc);
  VarId x = t.leaf(s.x);
  VarId mf = t.leaf(s.m_f);
  GenOut o = generator_forward(t, gv, cfg, X, x, mf, s.illum_feat);
  GlobalComposite gc = inverse_warp_compose(t, t.leaf(s.bg), o.x_h, s.region);
  return {t.val(o.x_h), t.val(gc.global), std::move(gc.warp_mask)};
}

// Identity path value: the generator applied to the real local pair.
inline Tensor run_identity(GeneratorParams& G, const NetConfig& cfg, const TrainingSample& s) {
  Tape t;
  GenVars gv;
  bind_generator(t, G, gv);
  VarId y = t.leaf(s.y);
  VarId mf = t.leaf(s.m_f);
  GenOut o = generator_forward(t, gv, cfg, y, y, mf, s.illum_feat);
  return t.val(o.x_h);
}

// ---- state ----

struct LossRow {
  long long step;
  double L_D_L, L_G_L, L_D_G, L_G_G, L_S_idt;
};

struct TrainState {
  TrainConfig cfg;
  GeneratorParams G;
  CriticParams DL;  // local critic, input [6,n,n] (image + illumination)
  CriticParams DG;  // global critic, input [4,N,N] (image + embedding mask)
  Adadelta optG, optD;
  long long step = 0;
  std::vector<LossRow> history;
};

inline std::vector<Tensor*> gather_params(GeneratorParams& g) {
  std::vector<Tensor*> out;
  g.visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

inline std::vector<Tensor*> gather_params(CriticParams& c) {
  std::vector<Tensor*> out;
  c.visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

inline std::vector<Tensor*> critic_params(TrainState& st) {
  std::vector<Tensor*> out = gather_params(st.DL);
  for (Tensor* t : gather_params(st.DG)) out.push_back(t);
  return out;
}

inline TrainState init_train_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState st;
  st.cfg = cfg;
  st.G = GeneratorParams::init(cfg.net, cfg.seed);
  st.DL = CriticParams::init(6, cfg.net.base_ch, cfg.w.clip_c, mix_seed(cfg.seed, 11));
  st.DG = CriticParams::init(4, cfg.net.base_ch, cfg.w.clip_c, mix_seed(cfg.seed, 12));
  st.optG.lr = cfg.lr;
  st.optD.lr = cfg.lr;
  st.optG.init(gather_params(st.G));
  st.optD.init(critic_params(st));
  return st;
}

// ---- checkpointing (parameters + optimizer accumulators + step) ----

inline void save_train_state(const std::string& path, TrainState& st) {
  std::vector<std::pair<std::string, const Tensor*>> items;
  st.G.visit([&](const std::string& n, Tensor& t) { items.emplace_back("G." + n, &t); });
  st.DL.visit([&](const std::string& n, Tensor& t) { items.emplace_back("DL." + n, &t); });
  st.DG.visit([&](const std::string& n, Tensor& t) { items.emplace_back("DG." + n, &t); });
  auto add_opt = [&](const char* tag, Adadelta& o) {
    for (size_t i = 0; i < o.eg2.size(); ++i) {
      items.emplace_back(std::string(tag) + ".eg2." + std::to_string(i), &o.eg2[i]);
      items.emplace_back(std::string(tag) + ".edx2." + std::to_string(i), &o.edx2[i]);
    }
  };
  add_opt("optG", st.optG);
  add_opt("optD", st.optD);
  save_checkpoint(path, items, st.step);
}

// st must already be initialized with the matching config.
inline void load_train_state(const std::string& path, TrainState& st) {
  Checkpoint ck = load_checkpoint(path);
  auto take = [&](const std::string& name, Tensor& dst) {
    const Tensor& src = ck.get(name);
    if (!src.same_shape(dst))
      throw std::invalid_argument("checkpoint: shape mismatch for " + name +
                                  " (config mismatch?)");
    dst = src;
  };
  st.G.visit([&](const std::string& n, Tensor& t) { take("G." + n, t); });
  st.DL.visit([&](const std::string& n, Tensor& t) { take("DL." + n, t); });
  st.DG.visit([&](const std::string& n, Tensor& t) { take("DG." + n, t); });
  auto take_opt = [&](const char* tag, Adadelta& o) {
    for (size_t i = 0; i < o.eg2.size(); ++i) {
      take(std::string(tag) + ".eg2." + std::to_string(i), o.eg2[i]);
      take(std::string(tag) + ".edx2." + std::to_string(i), o.edx2[i]);
    }
  };
  take_opt("optG", st.optG);
  take_opt("optD", st.optD);
  st.step = ck.step;
}

// ---- batch parallelism ----

// Results are written to per-index slots and reduced in index order, so the
// outcome does not depend on thread scheduling.
template <class F>
inline void parallel_for(int n, int threads, F&& fn) {
  int nt = std::min(threads, n);
  if (nt <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errs(static_cast<size_t>(nt));
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errs[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

namespace train_detail {

inline std::vector<Tensor> collect_grads(Tape& t, const std::vector<VarId>& ids) {
  std::vector<Tensor> out;
  out.reserve(ids.size());
  for (VarId id : ids)
    out.push_back(t.has_grad(id) ? t.grad(id) : Tensor(t.val(id).shape));
  return out;
}

inline void accumulate(std::vector<Tensor>& acc, const std::vector<Tensor>& g) {
  if (acc.empty()) {
    acc = g;
    return;
  }
  for (size_t j = 0; j < acc.size(); ++j)
    for (size_t i = 0; i < acc[j].size(); ++i) acc[j].data[i] += g[j].data[i];
}

}  // namespace train_detail

// ---- the alternating step ----

// d_steps_per_g critic updates on detached generator outputs (each followed
// by weight clipping), then one generator update through both critics and
// the identity path. Deterministic given (seed, step, corpus).
inline void train_step(TrainState& st, const std::vector<TrainingSample>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("train_step: empty corpus");
  const TrainConfig& cfg = st.cfg;
  const int B = cfg.batch;
  std::mt19937_64 rng(mix_seed(mix_seed(cfg.seed, 0x57e9a11), static_cast<std::uint64_t>(st.step)));
  auto draw_batch = [&] {
    std::vector<int> idx(static_cast<size_t>(B));
    for (int& i : idx) i = static_cast<int>(rng() % corpus.size());
    return idx;
  };

  LossRow row{st.step + 1, 0, 0, 0, 0, 0};

  // critic updates
  std::vector<Tensor*> dparams = critic_params(st);
  for (int d = 0; d < cfg.w.d_steps_per_g; ++d) {
    std::vector<int> idx = draw_batch();
    std::vector<std::vector<Tensor>> grads(static_cast<size_t>(B));
    std::vector<double> dlf(static_cast<size_t>(B)), dlr(static_cast<size_t>(B)),
        dgf(static_cast<size_t>(B)), dgr(static_cast<size_t>(B));
    parallel_for(B, cfg.threads, [&](int i) {
      const TrainingSample& s = corpus[static_cast<size_t>(idx[static_cast<size_t>(i)])];
      GenEval fake = run_generator(st.G, cfg.net, s);  // detached
      Tape t;
      CriticVars lv, gv;
      BoundVars bl = bind_critic(t, st.DL, lv);
      BoundVars bg = bind_critic(t, st.DG, gv);
      VarId sfl = critic_score(t, lv, concat_ch(t, t.leaf(fake.x_h), t.leaf(s.illum_local)));
      VarId srl = critic_score(t, lv, concat_ch(t, t.leaf(s.y), t.leaf(s.illum_local)));
      VarId sfg = critic_score(t, gv, concat_ch(t, t.leaf(fake.x_h_global), t.leaf(s.m_Y)));
      VarId srg = critic_score(t, gv, concat_ch(t, t.leaf(s.Ygl), t.leaf(s.m_Y)));
      VarId loss = add(t, sub(t, sfl, srl), scale(t, sub(t, sfg, srg), cfg.w.lambda_D_G));
      t.backward(scale(t, loss, 1.0 / B));
      std::vector<VarId> ids = bl.ids;
      ids.insert(ids.end(), bg.ids.begin(), bg.ids.end());
      grads[static_cast<size_t>(i)] = train_detail::collect_grads(t, ids);
      dlf[static_cast<size_t>(i)] = t.val(sfl)[0];
      dlr[static_cast<size_t>(i)] = t.val(srl)[0];
      dgf[static_cast<size_t>(i)] = t.val(sfg)[0];
      dgr[static_cast<size_t>(i)] = t.val(srg)[0];
    });
    std::vector<Tensor> total;
    for (const auto& g : grads) train_detail::accumulate(total, g);
    st.optD.apply(dparams, total);
    st.DL.clip(cfg.w.clip_c);
    st.DG.clip(cfg.w.clip_c);
    row.L_D_L = local_adv_losses(dlf, dlr).first;
    row.L_D_G = global_adv_losses(dgf, dgr).first;
    if (!std::isfinite(row.L_D_L) || !std::isfinite(row.L_D_G))
      throw NumericalError("train_step: non-finite critic loss at step " +
                           std::to_string(st.step + 1));
  }

  // generator update
  {
    std::vector<int> idx = draw_batch();
    std::vector<std::vector<Tensor>> grads(static_cast<size_t>(B));
    std::vector<double> gfl(static_cast<size_t>(B)), gfg(static_cast<size_t>(B)),
        idt(static_cast<size_t>(B));
    parallel_for(B, cfg.threads, [&](int i) {
      const TrainingSample& s = corpus[static_cast<size_t>(idx[static_cast<size_t>(i)])];
      Tape t;
      GenVars genv;
      BoundVars bgen = bind_generator(t, st.G, genv);
      CriticVars lv, gv;
      bind_critic(t, st.DL, lv);
      bind_critic(t, st.DG, gv);
      VarId X = t.leaf(s.Xloc);
      VarId x = t.leaf(s.x);
      VarId mf = t.leaf(s.m_f);
      GenOut o = generator_forward(t, genv, cfg.net, X, x, mf, s.illum_feat);
      GlobalComposite gc = inverse_warp_compose(t, t.leaf(s.bg), o.x_h, s.region);
      VarId sfl = critic_score(t, lv, concat_ch(t, o.x_h, t.leaf(s.illum_local)));
      VarId sfg = critic_score(t, gv, concat_ch(t, gc.global, t.leaf(s.m_Y)));
      // identity path: the generator applied to the real pair should return y
      VarId yid = t.leaf(s.y);
      GenOut oi = generator_forward(t, genv, cfg.net, yid, yid, mf, s.illum_feat);
      VarId l1 = mean_abs(t, sub(t, oi.x_h, yid));
      VarId loss = add(t, add(t, scale(t, sfl, -1.0), scale(t, sfg, -cfg.w.lambda_G)),
                       scale(t, l1, cfg.w.lambda_G_idt));
      t.backward(scale(t, loss, 1.0 / B));
      grads[static_cast<size_t>(i)] = train_detail::collect_grads(t, bgen.ids);
      gfl[static_cast<size_t>(i)] = t.val(sfl)[0];
      gfg[static_cast<size_t>(i)] = t.val(sfg)[0];
      idt[static_cast<size_t>(i)] = t.val(l1)[0];
    });
    std::vector<Tensor> total;
    for (const auto& g : grads) train_detail::accumulate(total, g);
    std::vector<Tensor*> gparams = gather_params(st.G);
    st.optG.apply(gparams, total);
    row.L_G_L = -batch_mean(gfl, "train_step");
    row.L_G_G = -batch_mean(gfg, "train_step");
    row.L_S_idt = batch_mean(idt, "train_step");
    if (!std::isfinite(row.L_G_L) || !std::isfinite(row.L_G_G) || !std::isfinite(row.L_S_idt))
      throw NumericalError("train_step: non-finite generator loss at step " +
                           std::to_string(st.step + 1));
  }

  st.step += 1;
  st.history.push_back(row);
}

inline void write_history_csv(const std::string& path, const std::vector<LossRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "step,L_D_L,L_G_L,L_D_G,L_G_G,L_S_idt\n";
  out.precision(17);
  for (const LossRow& r : rows)
    out << r.step << ',' << r.L_D_L << ',' << r.L_G_L << ',' << r.L_D_G << ',' << r.L_G_G << ','
        << r.L_S_idt << '\n';
}

// ---- shadow direction metric ----

struct AxisEstimate {
  bool found = false;
  double vx = 0, vy = 0;  // unit vector, (col, row) image coordinates
};

// Principal axis from the foreground-mask centroid to the centroid of pixels
// darkened relative to the reference composite outside m_f (threshold 0.05
// on the channel mean).
inline AxisEstimate darkening_axis(const Tensor& ref, const Tensor& img, const Tensor& m_f,
                                   double threshold = 0.05) {
  check_same_shape(ref, img, "darkening_axis");
  int H = ref.dim(1), W = ref.dim(2);
  double fw = 0, fr = 0, fc = 0;  // foreground centroid
  double dw = 0, dr = 0, dc = 0;  // darkened centroid
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      double m = m_f.at3(0, r, c);
      fw += m;
      fr += m * r;
      fc += m * c;
      if (m >= 0.5) continue;
      double d = 0.0;
      for (int ch = 0; ch < 3; ++ch) d += ref.at3(ch, r, c) - img.at3(ch, r, c);
      d /= 3.0;
      if (d > threshold) {
        dw += d;
        dr += d * r;
        dc += d * c;
      }
    }
  AxisEstimate a;
  if (fw <= 1e-9 || dw <= 1e-9) return a;
  double vx = dc / dw - fc / fw;
  double vy = dr / dw - fr / fw;
  double n = std::hypot(vx, vy);
  if (n <= 1e-9) return a;
  a.found = true;
  a.vx = vx / n;
  a.vy = vy / n;
  return a;
}

struct ShadowDirectionStats {
  double median_deg = 0, mean_deg = 0;
  int scored = 0;     // scenes with both reference and generated shadow
  int no_shadow = 0;  // generator produced no detectable darkening
  int skipped = 0;    // ground truth itself has no visible shadow
  int total = 0;
};

inline ShadowDirectionStats evaluate_shadow_direction(GeneratorParams& G, const NetConfig& cfg,
                                                      const std::vector<TrainingSample>& scenes,
                                                      int threads = 1) {
  ShadowDirectionStats st;
  st.total = static_cast<int>(scenes.size());
  // -1: skipped, -2: no generated shadow, otherwise angle in degrees
  std::vector<double> res(scenes.size(), -1.0);
  parallel_for(static_cast<int>(scenes.size()), threads, [&](int i) {
    const TrainingSample& s = scenes[static_cast<size_t>(i)];
    AxisEstimate ref = darkening_axis(s.x, s.y, s.m_f);
    if (!ref.found) return;  // stays "skipped"
    GenEval g = run_generator(G, cfg, s);
    AxisEstimate gen = darkening_axis(s.x, g.x_h, s.m_f);
    if (!gen.found) {
      res[static_cast<size_t>(i)] = -2.0;
      return;
    }
    double dot = std::clamp(ref.vx * gen.vx + ref.vy * gen.vy, -1.0, 1.0);
    res[static_cast<size_t>(i)] = std::acos(dot) * 180.0 / kPi;
  });
  std::vector<double> angles;
  for (double v : res) {
    if (v == -1.0) st.skipped += 1;
    else if (v == -2.0) st.no_shadow += 1;
    else angles.push_back(v);
  }
  st.scored = static_cast<int>(angles.size());
  if (!angles.empty()) {
    double sum = 0;
    for (double a : angles) sum += a;
    st.mean_deg = sum / static_cast<double>(angles.size());
    std::sort(angles.begin(), angles.end());
    size_t n = angles.size();
    st.median_deg = n % 2 ? angles[n / 2] : 0.5 * (angles[n / 2 - 1] + angles[n / 2]);
  }
  return st;
}

}  // namespace harmonize
