// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_TRAINER_HPP_
#define BSRNN_TRAINER_HPP_

#include <string>
#include <vector>

#include "bsrnn/checkpoint.hpp"
#include "bsrnn/config.hpp"
#include "bsrnn/datagen.hpp"
#include "bsrnn/energymeter.hpp"
#include "bsrnn/inference.hpp"
#include "bsrnn/model.hpp"

namespace bsrnn {

struct TrainOptions {
  std::string run_dir;
  HardwareSpec hardware;        // only feeds the energy estimate
  InferenceConfig inference;    // fader settings used for validation
  std::string config_snapshot;  // written to <run_dir>/config.json when non-empty
  std::string model_label = "bsrnn";
};

struct TrainResult {
  std::string status;  // completed | early-stopped | aborted-non-finite
  std::string best_checkpoint;
  std::string last_checkpoint;
  std::vector<double> epoch_losses;   // this invocation only
  std::vector<double> epoch_metrics;  // monitored validation value per epoch
  int epochs_completed = 0;           // across resumes
  bool resumed = false;
  RunReport report;
};

// Mean monitored value over the validation songs: uSDR of the stitched
// estimates, or the configured loss. Always stitches with the linear fader.
double validate_model(SegmentProcessor& proc, const TrackStore& valid, const std::string& target,
                      const InferenceConfig& inference, Monitor monitor, LossDomain domain,
                      const FrameParams& fp);
double validate_model(const SeparationModel& model, const TrackStore& valid,
                      const std::string& target, const InferenceConfig& inference, Monitor monitor,
                      LossDomain domain);

// Full training loop for one source model. Owns <run_dir> (lock file) and
// leaves behind: config.json, epochs.jsonl, last.ckpt, best.ckpt,
// report.json. A run directory holding a last.ckpt resumes from it and
// follows the same trajectory the uninterrupted run would have taken.
// A non-finite training loss aborts the run; the newest on-disk checkpoint
// is left untouched.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const DatagenConfig& datagen_cfg, const TrackStore& train_store,
                  const ActivityIndex& train_index, const TrackStore& valid_store,
                  const TrainOptions& options);

}  // namespace bsrnn

#endif  // BSRNN_TRAINER_HPP_
