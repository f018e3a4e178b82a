#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>

#include "harmonize/sh.hpp"
#include "harmonize/stm.hpp"
#include "harmonize/tensor.hpp"

namespace harmonize {

using json = nlohmann::json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- SH coefficient file: {"degree": L, "channels": [[...],[...],[...]]} ----

inline json sh_to_json(const SHCoefficients& c) {
  json j;
  j["degree"] = c.degree;
  j["channels"] = {c.channels[0], c.channels[1], c.channels[2]};
  return j;
}

inline SHCoefficients sh_from_json(const json& j) {
  SHCoefficients c(j.at("degree").get<int>());
  auto ch = j.at("channels");
  if (ch.size() != 3) throw IoError("sh file: expected 3 channels");
  for (int i = 0; i < 3; ++i) {
    auto v = ch[static_cast<size_t>(i)].get<std::vector<double>>();
    if (static_cast<int>(v.size()) != c.per_channel())
      throw IoError("sh file: coefficient count does not match degree");
    c.channels[static_cast<size_t>(i)] = std::move(v);
  }
  return c;
}

// ---- Region file: eight reals in vertex order (TL,TR,BR,BL; x,y pairs) ----

inline json region_to_json(const Region& r) {
  json j = json::array();
  for (const auto& p : r.v) {
    j.push_back(p[0]);
    j.push_back(p[1]);
  }
  return j;
}

inline Region region_from_json(const json& j) {
  if (!j.is_array() || j.size() != 8) throw IoError("region file: expected eight reals");
  Region r;
  for (int i = 0; i < 4; ++i) {
    r.v[static_cast<size_t>(i)][0] = j[static_cast<size_t>(2 * i)].get<double>();
    r.v[static_cast<size_t>(i)][1] = j[static_cast<size_t>(2 * i + 1)].get<double>();
  }
  return r;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  in >> j;
  return j;
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

// ---- checkpoint: [u32 header length][JSON header][little-endian doubles] ----
// Header: {"format_version":1, "step":n, "tensors":[{"name":..,"shape":[..]},..]}

constexpr int kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, const Tensor*>>& items,
                            long long step) {
  json header;
  header["format_version"] = kCheckpointVersion;
  header["step"] = step;
  header["tensors"] = json::array();
  for (const auto& [name, t] : items)
    header["tensors"].push_back({{"name", name}, {"shape", t->shape}});
  std::string hs = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, t] : items)
    out.write(reinterpret_cast<const char*>(t->data.data()),
              static_cast<std::streamsize>(t->data.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path);
}

struct Checkpoint {
  long long step = 0;
  std::map<std::string, Tensor> tensors;

  const Tensor& get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IoError("checkpoint: missing tensor " + name);
    return it->second;
  }
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  std::string hs(len, '\0');
  in.read(hs.data(), len);
  if (!in) throw IoError("truncated checkpoint header: " + path);
  json header = json::parse(hs);
  if (header.at("format_version").get<int>() != kCheckpointVersion)
    throw IoError("checkpoint: unsupported format version");
  Checkpoint ck;
  ck.step = header.at("step").get<long long>();
  for (const auto& e : header.at("tensors")) {
    Tensor t(e.at("shape").get<std::vector<int>>());
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    ck.tensors.emplace(e.at("name").get<std::string>(), std::move(t));
  }
  if (!in) throw IoError("truncated checkpoint data: " + path);
  return ck;
}

}  // namespace harmonize
