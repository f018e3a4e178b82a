// harmonize: synthetic-scene corpus generation, adversarial harmonization
// training, composition and evaluation.
//
// Exit codes: 0 success, 1 IO failure, 2 validation failure, 3 numerical
// failure.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "harmonize/corpus.hpp"
#include "harmonize/image_io.hpp"
#include "harmonize/training.hpp"

using namespace harmonize;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

json parse_set_value(const std::string& raw) {
  json v = json::parse(raw, nullptr, false);
  if (v.is_discarded()) return json(raw);  // plain string
  return v;
}

// "key=value" pairs from --set
template <class Apply>
void apply_overrides(const std::vector<std::string>& sets, Apply&& apply) {
  for (const std::string& kv : sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("--set expects key=value, got: " + kv);
    apply(kv.substr(0, eq), parse_set_value(kv.substr(eq + 1)));
  }
}

int cmd_gen_data(const std::string& out, int count, std::uint64_t seed,
                 const std::vector<std::string>& sets) {
  SynthConfig cfg;
  apply_overrides(sets, [&](const std::string& k, const json& v) { apply_synth_kv(cfg, k, v); });
  cfg.validate();
  std::vector<std::string> names = write_corpus(out, count, seed, cfg);
  std::cout << "wrote " << names.size() << " scenes to " << out << "\n";
  return kExitOk;
}

TrainConfig load_train_config(const std::string& config_path,
                              const std::vector<std::string>& sets, std::uint64_t* seed_flag) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = train_config_from_json(load_json_file(config_path));
  if (seed_flag) cfg.seed = *seed_flag;
  apply_overrides(sets, [&](const std::string& k, const json& v) { apply_config_kv(cfg, k, v); });
  cfg.validate();
  return cfg;
}

int cmd_train(const std::string& corpus_dir, const std::string& out,
              const std::string& config_path, const std::string& resume, bool seed_given,
              std::uint64_t seed, const std::vector<std::string>& sets) {
  TrainConfig cfg = load_train_config(config_path, sets, seed_given ? &seed : nullptr);
  CorpusOnDisk disk = open_corpus(corpus_dir);
  if (disk.scene_dirs.empty()) throw std::invalid_argument("train: corpus has no scenes");
  std::vector<TrainingSample> corpus = load_corpus(disk, cfg.net, 0, SIZE_MAX, cfg.threads);

  TrainState st = init_train_state(cfg);
  if (!resume.empty()) load_train_state(resume, st);

  fs::create_directories(out);
  while (st.step < cfg.steps) {
    train_step(st, corpus);
    if (st.step % 100 == 0 || st.step == cfg.steps) {
      const LossRow& r = st.history.back();
      std::cout << "step " << st.step << "  L_D_L " << r.L_D_L << "  L_G_L " << r.L_G_L
                << "  L_S_idt " << r.L_S_idt << "\n";
    }
  }
  save_train_state(out + "/ckpt.bin", st);
  save_json_file(out + "/config.json", train_config_to_json(cfg));
  if (!resume.empty() && fs::exists(out + "/loss_history.csv")) {
    std::ofstream csv(out + "/loss_history.csv", std::ios::app);
    if (!csv) throw IoError("cannot append to loss history");
    csv.precision(17);
    for (const LossRow& r : st.history)
      csv << r.step << ',' << r.L_D_L << ',' << r.L_G_L << ',' << r.L_D_G << ',' << r.L_G_G
          << ',' << r.L_S_idt << '\n';
  } else {
    write_history_csv(out + "/loss_history.csv", st.history);
  }
  std::cout << "trained to step " << st.step << ", checkpoint at " << out << "/ckpt.bin\n";
  return kExitOk;
}

int cmd_compose(const std::string& ckpt, const std::string& config_path, const std::string& bg_path,
                const std::string& fg_path, const std::string& region_path,
                const std::string& sh_path, const std::string& out,
                const std::vector<std::string>& sets) {
  TrainConfig cfg = load_train_config(config_path, sets, nullptr);
  TrainState st = init_train_state(cfg);
  load_train_state(ckpt, st);

  TrainingSample s;
  s.bg = read_png(bg_path);
  if (s.bg.ndim() != 3 || s.bg.dim(0) != 3 || s.bg.dim(1) != cfg.net.global_size ||
      s.bg.dim(2) != cfg.net.global_size)
    throw std::invalid_argument("compose: background must be RGB at the configured global size");
  Tensor fg = read_png(fg_path);
  if (fg.ndim() != 3 || fg.dim(0) != 4)
    throw std::invalid_argument("compose: foreground must be RGBA");
  s.region = region_from_json(load_json_file(region_path));
  if (!s.region.valid()) throw std::invalid_argument("compose: invalid region");
  s.sh = sh_from_json(load_json_file(sh_path));

  int n = cfg.net.local_size;
  Tensor spr = resize_bilinear(fg, n, n);
  s.m_f = Tensor({1, n, n});
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      s.m_f.at3(0, r, c) = std::clamp((spr.at3(3, r, c) + 1.0) * 0.5, 0.0, 1.0);
  Homography sq2reg = estimate_homography(Region::full_square(), s.region);
  Tensor Xloc = warp_value(s.bg, sq2reg, n, n);
  s.x = Tensor({3, n, n});
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        double a = s.m_f.at3(0, r, c);
        s.x.at3(ch, r, c) = (1.0 - a) * Xloc.at3(ch, r, c) + a * spr.at3(ch, r, c);
      }
  finalize_sample(s, cfg.net);

  GenEval g = run_generator(st.G, cfg.net, s);
  fs::create_directories(out);
  write_png(out + "/direct.png", s.x);
  write_png(out + "/local.png", g.x_h);
  write_png(out + "/global.png", g.x_h_global);
  std::cout << "wrote direct.png, local.png, global.png to " << out << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& config_path,
             const std::string& corpus_dir, const std::string& out, size_t first, size_t count,
             int threads, const std::vector<std::string>& sets) {
  TrainConfig cfg = load_train_config(config_path, sets, nullptr);
  TrainState st = init_train_state(cfg);
  load_train_state(ckpt, st);
  CorpusOnDisk disk = open_corpus(corpus_dir);
  if (disk.scene_dirs.empty()) throw std::invalid_argument("eval: corpus has no scenes");
  std::vector<TrainingSample> scenes = load_corpus(disk, cfg.net, first, count, threads);
  if (scenes.empty()) throw std::invalid_argument("eval: selected scene range is empty");

  double idt_sum = 0.0;
  long long violations = 0;
  std::vector<double> idt(scenes.size());
  std::vector<long long> viol(scenes.size());
  parallel_for(static_cast<int>(scenes.size()), threads, [&](int i) {
    const TrainingSample& s = scenes[static_cast<size_t>(i)];
    idt[static_cast<size_t>(i)] = identity_loss(run_identity(st.G, cfg.net, s), s.y);
    GenEval g = run_generator(st.G, cfg.net, s);
    long long v = 0;
    int N = cfg.net.global_size;
    for (int ch = 0; ch < 3; ++ch)
      for (int r = 0; r < N; ++r)
        for (int c = 0; c < N; ++c)
          if (g.warp_mask.at3(0, r, c) == 0.0 && g.x_h_global.at3(ch, r, c) != s.bg.at3(ch, r, c))
            ++v;
    viol[static_cast<size_t>(i)] = v;
  });
  for (double v : idt) idt_sum += v;
  for (long long v : viol) violations += v;
  ShadowDirectionStats stats = evaluate_shadow_direction(st.G, cfg.net, scenes, threads);

  json metrics{{"scenes", scenes.size()},
               {"identity_loss_mean", idt_sum / static_cast<double>(scenes.size())},
               {"shadow",
                {{"median_deg", stats.median_deg},
                 {"mean_deg", stats.mean_deg},
                 {"scored", stats.scored},
                 {"no_shadow", stats.no_shadow},
                 {"skipped", stats.skipped},
                 {"total", stats.total}}},
               {"mask_partition_violations", violations}};
  if (!out.empty()) save_json_file(out, metrics);
  std::cout << metrics.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial image composition with illumination-aware shadows"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic scene corpus");
  std::string gen_out;
  int gen_count = 100;
  std::uint64_t gen_seed = 1;
  std::vector<std::string> gen_sets;
  gen->add_option("--out", gen_out, "output corpus directory")->required();
  gen->add_option("--count", gen_count, "number of scenes");
  gen->add_option("--seed", gen_seed, "base seed");
  gen->add_option("--set", gen_sets, "scene config override key=value");

  // train
  auto* tr = app.add_subcommand("train", "train the harmonization networks");
  std::string tr_corpus, tr_out, tr_config, tr_resume;
  std::uint64_t tr_seed = 1;
  std::vector<std::string> tr_sets;
  tr->add_option("--corpus", tr_corpus, "corpus directory")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--config", tr_config, "training config JSON");
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "training seed");
  tr->add_option("--set", tr_sets, "config override key=value");

  // compose
  auto* co = app.add_subcommand("compose", "harmonize a foreground into a background");
  std::string co_ckpt, co_config, co_bg, co_fg, co_region, co_sh, co_out;
  std::vector<std::string> co_sets;
  co->add_option("--ckpt", co_ckpt, "checkpoint file")->required();
  co->add_option("--config", co_config, "training config JSON");
  co->add_option("--bg", co_bg, "background PNG")->required();
  co->add_option("--fg", co_fg, "foreground RGBA PNG")->required();
  co->add_option("--region", co_region, "region JSON")->required();
  co->add_option("--sh", co_sh, "SH coefficient JSON")->required();
  co->add_option("--out", co_out, "output directory")->required();
  co->add_option("--set", co_sets, "config override key=value");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  std::string ev_ckpt, ev_config, ev_corpus, ev_out;
  std::uint64_t ev_first = 0, ev_count = SIZE_MAX;
  int ev_threads = 8;
  std::vector<std::string> ev_sets;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--config", ev_config, "training config JSON");
  ev->add_option("--corpus", ev_corpus, "corpus directory")->required();
  ev->add_option("--out", ev_out, "metrics JSON output path");
  ev->add_option("--first", ev_first, "first scene index");
  ev->add_option("--count", ev_count, "number of scenes");
  ev->add_option("--threads", ev_threads, "evaluation threads");
  ev->add_option("--set", ev_sets, "config override key=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_out, gen_count, gen_seed, gen_sets);
    if (tr->parsed())
      return cmd_train(tr_corpus, tr_out, tr_config, tr_resume, tr_seed_opt->count() > 0, tr_seed,
                       tr_sets);
    if (co->parsed())
      return cmd_compose(co_ckpt, co_config, co_bg, co_fg, co_region, co_sh, co_out, co_sets);
    if (ev->parsed())
      return cmd_eval(ev_ckpt, ev_config, ev_corpus, ev_out, static_cast<size_t>(ev_first),
                      static_cast<size_t>(ev_count), ev_threads, ev_sets);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "io failure: " << e.what() << "\n";
    return kExitIo;
  } catch (const ShapeError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DegenerateQuad& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NoRegionFound& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DegenerateIllumination& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitValidation;
}
