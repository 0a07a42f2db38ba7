// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_CHECKPOINT_HPP_
#define BSRNN_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bsrnn/model.hpp"
#include "bsrnn/optim.hpp"

namespace bsrnn {

// Training progress carried alongside the weights so a run can resume.
struct CheckpointState {
  int epoch = -1;  // last completed epoch, -1 before any
  uint64_t seed = 0;
  std::string monitor = "uSDR";
  bool has_best = false;
  double best_value = 0.0;
  int best_epoch = -1;
  int epochs_since_best = 0;
};

struct CheckpointMeta {
  int version = 0;
  ModelConfig model;
  std::vector<std::pair<std::string, std::vector<int64_t>>> params;  // registration order
  bool has_optimizer = false;
  int64_t adam_t = 0;
  CheckpointState state;
};

// Single-file format: magic, version, JSON header (config, parameter table,
// training state), then raw little-endian doubles: every parameter value in
// registration order, followed by Adam m and v per parameter when present.
// Writes go to a sibling temp file and rename into place.
void save_checkpoint(const std::string& path, const SeparationModel& model,
                     const CheckpointState& state, const AdamOptimizer* adam = nullptr);

// Header only; cheap enough to probe many files.
CheckpointMeta read_checkpoint_meta(const std::string& path);

// Rebuilds the model from the stored config and fills in the weights. When
// `adam` is given the file must carry an optimizer section; moments and step
// count are restored so the next update continues the saved trajectory.
SeparationModel load_checkpoint(const std::string& path, CheckpointState* state = nullptr,
                                AdamOptimizer* adam = nullptr);

}  // namespace bsrnn

#endif  // BSRNN_CHECKPOINT_HPP_
