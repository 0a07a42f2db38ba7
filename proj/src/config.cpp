// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace bsrnn {
namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string joined(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

void reject_unknown(const ojson& j, const std::string& section,
                    std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail("config section '" + section + "' must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        known = true;
        break;
      }
    if (!known) fail("unknown config key '" + joined(section, item.key()) + "'");
  }
}

template <typename T>
T get_or(const ojson& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    fail(std::string("config key '") + key + "' has the wrong type");
  }
}

std::string get_str(const ojson& j, const char* key, const std::string& fallback) {
  return get_or<std::string>(j, key, fallback);
}

ojson parse_text(const std::string& text, const std::string& what) {
  try {
    return ojson::parse(text);
  } catch (const std::exception& e) {
    fail(what + ": " + e.what());
  }
}

ojson sad_to_ojson(const SadParams& p) {
  ojson j;
  j["window_s"] = p.window_s;
  j["hop_s"] = p.hop_s;
  j["rel_threshold_db"] = p.rel_threshold_db;
  j["abs_floor_dbfs"] = p.abs_floor_dbfs;
  j["min_segment_s"] = p.min_segment_s;
  return j;
}

SadParams sad_from_ojson(const ojson& j, const std::string& section) {
  reject_unknown(j, section,
                 {"window_s", "hop_s", "rel_threshold_db", "abs_floor_dbfs", "min_segment_s"});
  SadParams p;
  p.window_s = get_or(j, "window_s", p.window_s);
  p.hop_s = get_or(j, "hop_s", p.hop_s);
  p.rel_threshold_db = get_or(j, "rel_threshold_db", p.rel_threshold_db);
  p.abs_floor_dbfs = get_or(j, "abs_floor_dbfs", p.abs_floor_dbfs);
  p.min_segment_s = get_or(j, "min_segment_s", p.min_segment_s);
  return p;
}

ojson model_to_ojson(const ModelConfig& cfg) {
  ojson j;
  j["latent_dim"] = cfg.latent_dim;
  j["depth"] = cfg.depth;
  j["masker_factor"] = cfg.masker_factor;
  j["stereo_mode"] = to_string(cfg.stereo_mode);
  j["tac_activation"] = to_string(cfg.tac_activation);
  j["block_kind"] = to_string(cfg.block_kind);
  j["attention_heads"] = cfg.attention_heads;
  j["attention_dim"] = cfg.attention_dim;
  j["heads"] = cfg.heads;
  j["conv_dilations"] = cfg.conv_dilations;
  j["conv_kernel"] = cfg.conv_kernel;
  j["conv_hidden_factor"] = cfg.conv_hidden_factor;
  j["window_size"] = cfg.frame_params.window_size;
  j["hop"] = cfg.frame_params.hop;
  if (cfg.scheme.n_bins > 0) {
    ojson s;
    s["source"] = cfg.scheme.source_name;
    s["n_bins"] = cfg.scheme.n_bins;
    s["bands"] = cfg.scheme.bands;
    j["scheme"] = s;
  }
  return j;
}

ModelConfig model_from_ojson(const ojson& j, const std::string& section) {
  reject_unknown(j, section,
                 {"latent_dim", "depth", "masker_factor", "stereo_mode", "tac_activation",
                  "block_kind", "attention_heads", "attention_dim", "heads", "conv_dilations",
                  "conv_kernel", "conv_hidden_factor", "window_size", "hop", "scheme"});
  ModelConfig cfg;
  cfg.latent_dim = get_or(j, "latent_dim", cfg.latent_dim);
  cfg.depth = get_or(j, "depth", cfg.depth);
  cfg.masker_factor = get_or(j, "masker_factor", cfg.masker_factor);
  cfg.stereo_mode = stereo_mode_from_string(get_str(j, "stereo_mode", to_string(cfg.stereo_mode)));
  cfg.tac_activation =
      tac_activation_from_string(get_str(j, "tac_activation", to_string(cfg.tac_activation)));
  cfg.block_kind = block_kind_from_string(get_str(j, "block_kind", to_string(cfg.block_kind)));
  cfg.attention_heads = get_or(j, "attention_heads", cfg.attention_heads);
  cfg.attention_dim = get_or(j, "attention_dim", cfg.attention_dim);
  cfg.heads = get_or(j, "heads", cfg.heads);
  cfg.conv_dilations = get_or(j, "conv_dilations", cfg.conv_dilations);
  cfg.conv_kernel = get_or(j, "conv_kernel", cfg.conv_kernel);
  cfg.conv_hidden_factor = get_or(j, "conv_hidden_factor", cfg.conv_hidden_factor);
  cfg.frame_params.window_size = get_or(j, "window_size", cfg.frame_params.window_size);
  cfg.frame_params.hop = get_or(j, "hop", cfg.frame_params.hop);
  if (j.contains("scheme")) {
    const ojson& s = j.at("scheme");
    reject_unknown(s, joined(section, "scheme"), {"source", "n_bins", "bands"});
    cfg.scheme.source_name = get_str(s, "source", "");
    cfg.scheme.n_bins = get_or(s, "n_bins", 0);
    cfg.scheme.bands = get_or(s, "bands", std::vector<std::pair<int, int>>{});
  }
  return cfg;
}

ojson train_to_ojson(const TrainConfig& cfg) {
  ojson j;
  j["base_lr"] = cfg.base_lr;
  j["reference_batch"] = cfg.reference_batch;
  j["batch"] = cfg.batch;
  j["batch_adapt"] = to_string(cfg.batch_adapt);
  j["decay_factor"] = cfg.decay_factor;
  j["decay_every"] = cfg.decay_every;
  j["clip_norm"] = cfg.clip_norm;
  j["max_epochs"] = cfg.max_epochs;
  j["patience"] = cfg.patience;
  j["monitor"] = to_string(cfg.monitor);
  j["loss_domain"] = to_string(cfg.loss_domain);
  j["seed"] = cfg.seed;
  return j;
}

TrainConfig train_from_ojson(const ojson& j, const std::string& section, uint64_t default_seed) {
  reject_unknown(j, section,
                 {"base_lr", "reference_batch", "batch", "batch_adapt", "decay_factor",
                  "decay_every", "clip_norm", "max_epochs", "patience", "monitor", "loss_domain",
                  "seed"});
  TrainConfig cfg;
  cfg.seed = default_seed;
  cfg.base_lr = get_or(j, "base_lr", cfg.base_lr);
  cfg.reference_batch = get_or(j, "reference_batch", cfg.reference_batch);
  cfg.batch = get_or(j, "batch", cfg.batch);
  cfg.batch_adapt = batch_adapt_from_string(get_str(j, "batch_adapt", to_string(cfg.batch_adapt)));
  cfg.decay_factor = get_or(j, "decay_factor", cfg.decay_factor);
  cfg.decay_every = get_or(j, "decay_every", cfg.decay_every);
  cfg.clip_norm = get_or(j, "clip_norm", cfg.clip_norm);
  cfg.max_epochs = get_or(j, "max_epochs", cfg.max_epochs);
  cfg.patience = get_or(j, "patience", cfg.patience);
  cfg.monitor = monitor_from_string(get_str(j, "monitor", to_string(cfg.monitor)));
  cfg.loss_domain = loss_domain_from_string(get_str(j, "loss_domain", to_string(cfg.loss_domain)));
  cfg.seed = get_or(j, "seed", cfg.seed);
  return cfg;
}

ojson datagen_to_ojson(const DatagenConfig& cfg) {
  ojson j;
  j["chunk_s"] = cfg.chunk_s;
  j["gain_low_db"] = cfg.gain_low_db;
  j["gain_high_db"] = cfg.gain_high_db;
  j["drop_prob"] = cfg.drop_prob;
  j["drop_mode"] = to_string(cfg.drop_mode);
  j["use_sad"] = cfg.use_sad;
  j["umx_augment"] = cfg.umx_augment;
  j["sad"] = sad_to_ojson(cfg.sad);
  j["epoch_size"] = cfg.epoch_size;
  j["target"] = cfg.target;
  j["max_retries"] = cfg.max_retries;
  return j;
}

DatagenConfig datagen_from_ojson(const ojson& j, const std::string& section) {
  reject_unknown(j, section,
                 {"chunk_s", "gain_low_db", "gain_high_db", "drop_prob", "drop_mode", "use_sad",
                  "umx_augment", "sad", "epoch_size", "target", "max_retries"});
  DatagenConfig cfg;
  cfg.chunk_s = get_or(j, "chunk_s", cfg.chunk_s);
  cfg.gain_low_db = get_or(j, "gain_low_db", cfg.gain_low_db);
  cfg.gain_high_db = get_or(j, "gain_high_db", cfg.gain_high_db);
  cfg.drop_prob = get_or(j, "drop_prob", cfg.drop_prob);
  cfg.drop_mode = drop_mode_from_string(get_str(j, "drop_mode", to_string(cfg.drop_mode)));
  cfg.use_sad = get_or(j, "use_sad", cfg.use_sad);
  cfg.umx_augment = get_or(j, "umx_augment", cfg.umx_augment);
  if (j.contains("sad")) cfg.sad = sad_from_ojson(j.at("sad"), joined(section, "sad"));
  cfg.epoch_size = get_or(j, "epoch_size", cfg.epoch_size);
  cfg.target = get_str(j, "target", cfg.target);
  cfg.max_retries = get_or(j, "max_retries", cfg.max_retries);
  return cfg;
}

ojson inference_to_ojson(const InferenceConfig& cfg) {
  ojson j;
  j["method"] = to_string(cfg.method);
  j["ola_segment_s"] = cfg.ola_segment_s;
  j["ola_hop_s"] = cfg.ola_hop_s;
  j["fader_segment_s"] = cfg.fader_segment_s;
  j["fader_overlap"] = cfg.fader_overlap;
  return j;
}

InferenceConfig inference_from_ojson(const ojson& j, const std::string& section) {
  reject_unknown(j, section,
                 {"method", "ola_segment_s", "ola_hop_s", "fader_segment_s", "fader_overlap"});
  InferenceConfig cfg;
  cfg.method = inference_method_from_string(get_str(j, "method", to_string(cfg.method)));
  cfg.ola_segment_s = get_or(j, "ola_segment_s", cfg.ola_segment_s);
  cfg.ola_hop_s = get_or(j, "ola_hop_s", cfg.ola_hop_s);
  cfg.fader_segment_s = get_or(j, "fader_segment_s", cfg.fader_segment_s);
  cfg.fader_overlap = get_or(j, "fader_overlap", cfg.fader_overlap);
  return cfg;
}

}  // namespace

BatchAdapt batch_adapt_from_string(const std::string& s) {
  if (s == "scale-lr") return BatchAdapt::kScaleLr;
  if (s == "accumulate-gradients") return BatchAdapt::kAccumulateGradients;
  throw std::invalid_argument("unknown batch_adapt: " + s);
}

Monitor monitor_from_string(const std::string& s) {
  if (s == "uSDR") return Monitor::kUSdr;
  if (s == "validation-loss") return Monitor::kValidationLoss;
  throw std::invalid_argument("unknown monitor: " + s);
}

std::string to_string(BatchAdapt a) {
  return a == BatchAdapt::kScaleLr ? "scale-lr" : "accumulate-gradients";
}

std::string to_string(Monitor m) { return m == Monitor::kUSdr ? "uSDR" : "validation-loss"; }

void TrainConfig::validate() const {
  if (!(base_lr > 0.0)) throw std::invalid_argument("base_lr must be positive");
  if (reference_batch < 1) throw std::invalid_argument("reference_batch must be >= 1");
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (!(decay_factor > 0.0) || decay_factor > 1.0)
    throw std::invalid_argument("decay_factor must be in (0, 1]");
  if (decay_every < 1) throw std::invalid_argument("decay_every must be >= 1");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
}

void PipelineConfig::validate() const {
  train.validate();
  datagen.validate();
  inference.validate();
  if (model.scheme.n_bins > 0) model.validate();
}

std::string PipelineConfig::resolved_dataset_root() const {
  if (!dataset_root.empty()) return dataset_root;
  const char* env = std::getenv("BSRNN_DATASET_ROOT");
  if (env != nullptr && *env != '\0') return env;
  throw std::runtime_error(
      "dataset root not set: put dataset_root in the config or export BSRNN_DATASET_ROOT");
}

std::string PipelineConfig::to_json() const {
  ojson j;
  j["dataset_root"] = dataset_root;
  j["scheme_file"] = scheme_file;
  j["output_dir"] = output_dir;
  j["seed"] = seed;
  j["model"] = model_to_ojson(model);
  j["train"] = train_to_ojson(train);
  j["datagen"] = datagen_to_ojson(datagen);
  j["inference"] = inference_to_ojson(inference);
  return j.dump(2);
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  ojson j = parse_text(text, "config parse error");
  reject_unknown(j, "",
                 {"dataset_root", "scheme_file", "output_dir", "seed", "model", "train", "datagen",
                  "inference"});
  PipelineConfig cfg;
  cfg.dataset_root = get_str(j, "dataset_root", cfg.dataset_root);
  cfg.scheme_file = get_str(j, "scheme_file", cfg.scheme_file);
  cfg.output_dir = get_str(j, "output_dir", cfg.output_dir);
  cfg.seed = get_or(j, "seed", cfg.seed);
  if (j.contains("model")) cfg.model = model_from_ojson(j.at("model"), "model");
  if (j.contains("train"))
    cfg.train = train_from_ojson(j.at("train"), "train", cfg.seed);
  else
    cfg.train.seed = cfg.seed;
  if (j.contains("datagen")) cfg.datagen = datagen_from_ojson(j.at("datagen"), "datagen");
  if (j.contains("inference")) cfg.inference = inference_from_ojson(j.at("inference"), "inference");
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path,
                                    const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (!overrides.empty()) text = apply_overrides(text, overrides);
  return from_json(text);
}

std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides) {
  ojson j = parse_text(json_text, "config parse error");
  for (const std::string& entry : overrides) {
    size_t eq = entry.find('=');
    if (eq == std::string::npos || eq == 0)
      fail("override must look like section.key=value, got '" + entry + "'");
    std::string path = entry.substr(0, eq);
    std::string value = entry.substr(eq + 1);

    std::vector<std::string> parts;
    size_t pos = 0;
    while (true) {
      size_t dot = path.find('.', pos);
      parts.push_back(path.substr(pos, dot == std::string::npos ? dot : dot - pos));
      if (dot == std::string::npos) break;
      pos = dot + 1;
    }
    for (const std::string& p : parts)
      if (p.empty()) fail("override path has an empty segment: '" + path + "'");

    ojson* node = &j;
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->is_object()) fail("override path crosses a non-object at '" + parts[i] + "'");
      node = &(*node)[parts[i]];
      if (node->is_null()) *node = ojson::object();
    }
    if (!node->is_object()) fail("override path crosses a non-object in '" + path + "'");

    ojson parsed;
    try {
      parsed = ojson::parse(value);
    } catch (const std::exception&) {
      parsed = value;  // bare words become strings
    }
    (*node)[parts.back()] = parsed;
  }
  return j.dump(2);
}

std::string model_config_to_json(const ModelConfig& cfg) { return model_to_ojson(cfg).dump(2); }

ModelConfig model_config_from_json(const std::string& text) {
  return model_from_ojson(parse_text(text, "model config parse error"), "model");
}

std::vector<std::string> read_song_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open song list: " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    size_t b = line.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t\r\n");
    std::string name = line.substr(b, e - b + 1);
    if (name[0] == '#') continue;
    names.push_back(name);
  }
  return names;
}

}  // namespace bsrnn
