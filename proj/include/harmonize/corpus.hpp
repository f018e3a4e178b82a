#pragma once

#include <filesystem>

#include "harmonize/image_io.hpp"
#include "harmonize/synth.hpp"
#include "harmonize/training.hpp"

namespace harmonize {

namespace fs = std::filesystem;

// ---- synth config <-> JSON (same flat key style as TrainConfig) ----

inline void apply_synth_kv(SynthConfig& c, const std::string& key, const json& v) {
  if (key == "N") c.N = v.get<int>();
  else if (key == "n") c.n = v.get<int>();
  else if (key == "sprite_size") c.sprite_size = v.get<int>();
  else if (key == "elev_min_deg") c.elev_min = v.get<double>() * kPi / 180.0;
  else if (key == "elev_max_deg") c.elev_max = v.get<double>() * kPi / 180.0;
  else if (key == "attenuation") c.attenuation = v.get<double>();
  else if (key == "min_distractors") c.min_distractors = v.get<int>();
  else if (key == "max_distractors") c.max_distractors = v.get<int>();
  else if (key == "sh_degree") c.sh_degree = v.get<int>();
  else if (key == "pano_h") c.pano_h = v.get<int>();
  else if (key == "ambient") c.ambient = v.get<double>();
  else throw std::invalid_argument("unknown scene config key: " + key);
}

inline json synth_config_to_json(const SynthConfig& c) {
  return json{{"N", c.N},
              {"n", c.n},
              {"sprite_size", c.sprite_size},
              {"elev_min_deg", c.elev_min * 180.0 / kPi},
              {"elev_max_deg", c.elev_max * 180.0 / kPi},
              {"attenuation", c.attenuation},
              {"min_distractors", c.min_distractors},
              {"max_distractors", c.max_distractors},
              {"sh_degree", c.sh_degree},
              {"pano_h", c.pano_h},
              {"ambient", c.ambient}};
}

inline SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  if (!j.is_object()) throw std::invalid_argument("scene config: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) apply_synth_kv(c, it.key(), it.value());
  c.validate();
  return c;
}

// ---- on-disk layout ----
// <dir>/manifest.json
// <dir>/scene_<seed>/{bg,fg,m_f,x,y,Y,m_Y}.png + region.json + sh.json
// Masks are stored through the same [-1,1] PNG mapping (0 -> black).

inline Tensor mask_to_img(const Tensor& m01) {
  Tensor t = m01;
  for (double& v : t.data) v = v * 2.0 - 1.0;
  return t;
}

inline Tensor img_to_mask(const Tensor& img) {
  Tensor t = img;
  for (double& v : t.data) v = (v + 1.0) * 0.5;
  return t;
}

inline void write_scene_dir(const std::string& dir, const CompositeSample& s) {
  fs::create_directories(dir);
  write_png(dir + "/bg.png", s.bg);
  write_png(dir + "/fg.png", s.fg);
  write_png(dir + "/m_f.png", mask_to_img(s.m_f));
  write_png(dir + "/x.png", s.x);
  write_png(dir + "/y.png", s.y);
  write_png(dir + "/Y.png", s.Ygl);
  write_png(dir + "/m_Y.png", mask_to_img(s.m_Y));
  save_json_file(dir + "/region.json", region_to_json(s.region));
  save_json_file(dir + "/sh.json", sh_to_json(s.gt_sh));
}

// Generates `count` scenes from consecutive seeds starting at base_seed;
// seeds whose random layout leaves no room for a region are skipped, so the
// scene set is still a pure function of (base_seed, count, cfg).
inline std::vector<std::string> write_corpus(const std::string& dir, int count,
                                             std::uint64_t base_seed, const SynthConfig& cfg) {
  cfg.validate();
  if (count < 1) throw std::invalid_argument("write_corpus: count must be >= 1");
  fs::create_directories(dir);
  std::vector<std::string> names;
  std::uint64_t seed = base_seed;
  int guard = 0;
  while (static_cast<int>(names.size()) < count) {
    try {
      CompositeSample s = gen_scene(seed, cfg);
      std::string name = "scene_" + std::to_string(seed);
      write_scene_dir(dir + "/" + name, s);
      names.push_back(name);
      guard = 0;
    } catch (const NoRegionFound&) {
      if (++guard > 1000) throw;  // configuration leaves no room for regions
    }
    ++seed;
  }
  json manifest;
  manifest["format_version"] = 1;
  manifest["base_seed"] = base_seed;
  manifest["config"] = synth_config_to_json(cfg);
  manifest["scenes"] = names;
  save_json_file(dir + "/manifest.json", manifest);
  return names;
}

struct CorpusOnDisk {
  SynthConfig cfg;
  std::vector<std::string> scene_dirs;  // absolute/relative paths, manifest order
};

inline CorpusOnDisk open_corpus(const std::string& dir) {
  json manifest = load_json_file(dir + "/manifest.json");
  if (manifest.at("format_version").get<int>() != 1)
    throw std::invalid_argument("corpus: unsupported manifest version");
  CorpusOnDisk c;
  c.cfg = synth_config_from_json(manifest.at("config"));
  for (const auto& name : manifest.at("scenes"))
    c.scene_dirs.push_back(dir + "/" + name.get<std::string>());
  return c;
}

inline TrainingSample read_scene_dir(const std::string& dir, const NetConfig& net) {
  TrainingSample s;
  s.bg = read_png(dir + "/bg.png");
  s.x = read_png(dir + "/x.png");
  s.y = read_png(dir + "/y.png");
  s.Ygl = read_png(dir + "/Y.png");
  s.m_f = img_to_mask(read_png(dir + "/m_f.png"));
  s.m_Y = img_to_mask(read_png(dir + "/m_Y.png"));
  s.region = region_from_json(load_json_file(dir + "/region.json"));
  s.sh = sh_from_json(load_json_file(dir + "/sh.json"));
  finalize_sample(s, net);
  return s;
}

// Loads scenes [first, first+count) in manifest order.
inline std::vector<TrainingSample> load_corpus(const CorpusOnDisk& c, const NetConfig& net,
                                               size_t first = 0, size_t count = SIZE_MAX,
                                               int threads = 1) {
  if (first > c.scene_dirs.size()) throw std::invalid_argument("load_corpus: range out of bounds");
  size_t n = std::min(count, c.scene_dirs.size() - first);
  std::vector<TrainingSample> out(n);
  parallel_for(static_cast<int>(n), threads, [&](int i) {
    out[static_cast<size_t>(i)] =
        read_scene_dir(c.scene_dirs[first + static_cast<size_t>(i)], net);
  });
  return out;
}

}  // namespace harmonize
