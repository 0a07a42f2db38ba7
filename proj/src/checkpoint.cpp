// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "bsrnn/config.hpp"
#include "json.hpp"

namespace bsrnn {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'B', 'S', 'R', 'N', 'N', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

void write_bytes(std::ofstream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* p, size_t n, const std::string& what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw std::runtime_error("checkpoint truncated while reading " + what);
}

json state_to_json(const CheckpointState& s) {
  json j;
  j["epoch"] = s.epoch;
  j["seed"] = s.seed;
  j["monitor"] = s.monitor;
  j["has_best"] = s.has_best;
  j["best_value"] = s.best_value;
  j["best_epoch"] = s.best_epoch;
  j["epochs_since_best"] = s.epochs_since_best;
  return j;
}

CheckpointState state_from_json(const json& j) {
  CheckpointState s;
  s.epoch = j.at("epoch").get<int>();
  s.seed = j.at("seed").get<uint64_t>();
  s.monitor = j.at("monitor").get<std::string>();
  s.has_best = j.at("has_best").get<bool>();
  s.best_value = j.at("best_value").get<double>();
  s.best_epoch = j.at("best_epoch").get<int>();
  s.epochs_since_best = j.at("epochs_since_best").get<int>();
  return s;
}

CheckpointMeta read_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  read_bytes(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  uint32_t version = 0;
  read_bytes(in, &version, sizeof(version), "version");
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  uint64_t header_len = 0;
  read_bytes(in, &header_len, sizeof(header_len), "header length");
  std::string text(header_len, '\0');
  read_bytes(in, text.data(), header_len, "header");

  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  CheckpointMeta meta;
  meta.version = static_cast<int>(version);
  meta.model = model_config_from_json(j.at("model").dump());
  for (const auto& p : j.at("params")) {
    meta.params.emplace_back(p.at("name").get<std::string>(),
                             p.at("shape").get<std::vector<int64_t>>());
  }
  meta.has_optimizer = j.at("has_optimizer").get<bool>();
  meta.adam_t = j.value("adam_t", int64_t{0});
  meta.state = state_from_json(j.at("state"));
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const SeparationModel& model,
                     const CheckpointState& state, const AdamOptimizer* adam) {
  json j;
  j["model"] = json::parse(model_config_to_json(model.config()));
  json params = json::array();
  for (const auto& [name, var] : model.params().entries()) {
    json p;
    p["name"] = name;
    p["shape"] = var->value.shape();
    params.push_back(p);
  }
  j["params"] = params;
  j["has_optimizer"] = adam != nullptr;
  if (adam != nullptr) j["adam_t"] = adam->steps_taken();
  j["state"] = state_to_json(state);
  const std::string header = j.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + tmp);
    write_bytes(out, kMagic, sizeof(kMagic));
    write_bytes(out, &kVersion, sizeof(kVersion));
    uint64_t header_len = header.size();
    write_bytes(out, &header_len, sizeof(header_len));
    write_bytes(out, header.data(), header.size());
    for (const auto& [name, var] : model.params().entries())
      write_bytes(out, var->value.data(), sizeof(double) * var->value.numel());
    if (adam != nullptr) {
      const auto& moments = adam->state();
      for (const auto& [name, var] : model.params().entries()) {
        auto it = moments.find(name);
        if (it != moments.end()) {
          write_bytes(out, it->second.m.data(), sizeof(double) * it->second.m.numel());
          write_bytes(out, it->second.v.data(), sizeof(double) * it->second.v.numel());
        } else {  // parameter never stepped; zeros match lazy initialization
          std::vector<double> zeros(var->value.numel(), 0.0);
          write_bytes(out, zeros.data(), sizeof(double) * zeros.size());
          write_bytes(out, zeros.data(), sizeof(double) * zeros.size());
        }
      }
    }
    out.flush();
    if (!out) throw std::runtime_error("checkpoint write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return read_header(in, path);
}

SeparationModel load_checkpoint(const std::string& path, CheckpointState* state,
                                AdamOptimizer* adam) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  CheckpointMeta meta = read_header(in, path);
  if (adam != nullptr && !meta.has_optimizer)
    throw std::runtime_error("checkpoint has no optimizer state: " + path);

  SeparationModel model(meta.model, meta.state.seed);
  const auto& entries = model.params().entries();
  if (entries.size() != meta.params.size())
    throw std::runtime_error("checkpoint parameter table does not match the model");
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, var] = entries[i];
    if (meta.params[i].first != name || meta.params[i].second != var->value.shape())
      throw std::runtime_error("checkpoint parameter mismatch at '" + meta.params[i].first + "'");
    read_bytes(in, var->value.data(), sizeof(double) * var->value.numel(), "weights of " + name);
  }
  if (adam != nullptr) {
    std::map<std::string, AdamOptimizer::Moments> moments;
    for (const auto& [name, var] : entries) {
      AdamOptimizer::Moments mv{Tensor(var->value.shape()), Tensor(var->value.shape())};
      read_bytes(in, mv.m.data(), sizeof(double) * mv.m.numel(), "adam m of " + name);
      read_bytes(in, mv.v.data(), sizeof(double) * mv.v.numel(), "adam v of " + name);
      moments.emplace(name, std::move(mv));
    }
    adam->restore(std::move(moments), meta.adam_t);
  }
  if (state != nullptr) *state = meta.state;
  return model;
}

}  // namespace bsrnn
