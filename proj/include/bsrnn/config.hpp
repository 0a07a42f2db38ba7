// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_CONFIG_HPP_
#define BSRNN_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "bsrnn/datagen.hpp"
#include "bsrnn/inference.hpp"
#include "bsrnn/loss.hpp"
#include "bsrnn/model.hpp"

namespace bsrnn {

enum class BatchAdapt { kScaleLr, kAccumulateGradients };
enum class Monitor { kUSdr, kValidationLoss };

BatchAdapt batch_adapt_from_string(const std::string& s);
Monitor monitor_from_string(const std::string& s);
std::string to_string(BatchAdapt a);
std::string to_string(Monitor m);

struct TrainConfig {
  double base_lr = 1e-3;
  int reference_batch = 16;  // batch size the base_lr was tuned for
  int batch = 16;            // global batch size actually used
  BatchAdapt batch_adapt = BatchAdapt::kAccumulateGradients;
  double decay_factor = 0.98;
  int decay_every = 2;  // epochs per decay step
  double clip_norm = 5.0;
  int max_epochs = 200;
  int patience = 10;
  Monitor monitor = Monitor::kUSdr;
  LossDomain loss_domain = LossDomain::kTimePlusStft;
  uint64_t seed = 0;

  void validate() const;
};

// Everything one run needs: paths plus the per-stage configs. The JSON form
// rejects unknown keys so typos fail loudly instead of being ignored.
struct PipelineConfig {
  std::string dataset_root;  // empty defers to $BSRNN_DATASET_ROOT
  std::string scheme_file;   // empty uses the built-in band ranges
  std::string output_dir = "runs";
  uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  DatagenConfig datagen;
  InferenceConfig inference;

  void validate() const;
  std::string resolved_dataset_root() const;  // throws when nothing is set

  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);
  static PipelineConfig load(const std::string& path,
                             const std::vector<std::string>& overrides = {});
};

// "section.key=value" assignments applied to the JSON form before parsing.
// Values are parsed as JSON when possible, otherwise taken as strings.
std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides);

// Sub-config JSON (used by the pipeline file and the checkpoint header).
// The model form carries the band scheme only when one is attached.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

// One song name per line; blank lines and '#' comments are skipped.
std::vector<std::string> read_song_list(const std::string& path);

}  // namespace bsrnn

#endif  // BSRNN_CONFIG_HPP_
