// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "bsrnn/loss.hpp"
#include "bsrnn/metrics.hpp"
#include "bsrnn/optim.hpp"
#include "bsrnn/spectral.hpp"
#include "json.hpp"

namespace bsrnn {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Exclusive ownership of a run directory for the lifetime of one train call.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (f == nullptr)
      throw std::runtime_error("run directory is locked by another process: " + dir.string());
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

void add_into(Waveform& acc, const Waveform& w) {
  if (acc.channels != w.channels || acc.length != w.length)
    throw std::runtime_error("stem shapes disagree while building a validation mixture");
  for (size_t i = 0; i < acc.samples.size(); ++i) acc.samples[i] += w.samples[i];
}

Waveform song_mixture(const TrackStore& store, int song) {
  Waveform mix;
  for (int k = 0; k < 4; ++k) {
    Waveform stem = store.read_stem(song, kStemNames[k], 0, store.song_length(song));
    if (k == 0)
      mix = std::move(stem);
    else
      add_into(mix, stem);
  }
  return mix;
}

void append_jsonl(const fs::path& path, const json& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  out << record.dump() << "\n";
}

CheckpointState make_state(int epoch, uint64_t seed, Monitor monitor, const EarlyStop& stopper) {
  CheckpointState s;
  s.epoch = epoch;
  s.seed = seed;
  s.monitor = to_string(monitor);
  s.has_best = stopper.has_best();
  if (s.has_best) {
    s.best_value = stopper.best_value();
    s.best_epoch = stopper.best_epoch();
    s.epochs_since_best = stopper.epochs_since_best();
  }
  return s;
}

}  // namespace

double validate_model(SegmentProcessor& proc, const TrackStore& valid, const std::string& target,
                      const InferenceConfig& inference, Monitor monitor, LossDomain domain,
                      const FrameParams& fp) {
  const int n = valid.num_songs();
  if (n == 0) throw std::invalid_argument("validation store is empty");
  stem_index(target);

  std::vector<std::pair<Waveform, Waveform>> pairs;
  double loss_sum = 0.0;
  for (int s = 0; s < n; ++s) {
    Waveform mixture = song_mixture(valid, s);
    Waveform ref = valid.read_stem(s, target, 0, valid.song_length(s));
    Waveform est = separate_fader(mixture, proc, inference);
    if (monitor == Monitor::kUSdr) {
      pairs.emplace_back(std::move(ref), std::move(est));
    } else {
      loss_sum += compute_loss(stft(est, fp), stft(ref, fp), ref, domain);
    }
  }
  return monitor == Monitor::kUSdr ? usdr(pairs) : loss_sum / n;
}

double validate_model(const SeparationModel& model, const TrackStore& valid,
                      const std::string& target, const InferenceConfig& inference, Monitor monitor,
                      LossDomain domain) {
  ModelSegmentProcessor proc(model);
  return validate_model(proc, valid, target, inference, monitor, domain,
                        model.config().frame_params);
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const DatagenConfig& datagen_cfg, const TrackStore& train_store,
                  const ActivityIndex& train_index, const TrackStore& valid_store,
                  const TrainOptions& options) {
  model_cfg.validate();
  train_cfg.validate();
  datagen_cfg.validate();
  options.inference.validate();
  if (options.run_dir.empty()) throw std::invalid_argument("run_dir must be set");

  const fs::path run_dir(options.run_dir);
  fs::create_directories(run_dir);
  RunLock lock(run_dir);

  if (!options.config_snapshot.empty()) {
    std::ofstream snap(run_dir / "config.json", std::ios::trunc);
    snap << options.config_snapshot;
  }

  const fs::path last_path = run_dir / "last.ckpt";
  const fs::path best_path = run_dir / "best.ckpt";
  const fs::path log_path = run_dir / "epochs.jsonl";
  const bool maximize = train_cfg.monitor == Monitor::kUSdr;

  TrainResult result;
  result.last_checkpoint = last_path.string();
  result.best_checkpoint = best_path.string();

  AdamOptimizer adam;
  EarlyStop stopper(train_cfg.patience, maximize);
  int start_epoch = 0;
  SeparationModel model = [&]() {
    if (fs::exists(last_path)) {
      CheckpointState st;
      SeparationModel m = load_checkpoint(last_path.string(), &st, &adam);
      if (st.has_best) stopper.restore(st.best_value, st.best_epoch, st.epochs_since_best);
      start_epoch = st.epoch + 1;
      result.resumed = true;
      return m;
    }
    return SeparationModel(model_cfg, train_cfg.seed);
  }();
  result.epochs_completed = start_epoch;

  // Group size: examples consumed per parameter update. Accumulation stacks
  // micro-batches up to the reference batch; lr scaling updates per batch
  // with the rate adjusted to keep lr/batch constant.
  int group = train_cfg.batch;
  double effective_base = train_cfg.base_lr;
  if (train_cfg.batch_adapt == BatchAdapt::kAccumulateGradients) {
    int k = (train_cfg.reference_batch + train_cfg.batch - 1) / train_cfg.batch;
    group = k * train_cfg.batch;
  } else {
    effective_base = adjusted_lr(train_cfg.base_lr, train_cfg.batch, train_cfg.reference_batch);
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto hours = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 3600.0;
  };
  auto finish = [&](const std::string& status) {
    result.status = status;
    RunReport& rep = result.report;
    rep.run_id = run_dir.filename().string();
    rep.source = datagen_cfg.target;
    rep.model_label = options.model_label;
    rep.wall_time_h = hours();
    rep.hardware = options.hardware;
    rep.energy_kwh = estimate_energy_kwh(rep.wall_time_h, options.hardware);
    rep.best_metric_db = stopper.has_best() ? stopper.best_value() : 0.0;
    rep.epochs = result.epochs_completed;
    rep.seed = train_cfg.seed;
    std::ofstream rpt(run_dir / "report.json", std::ios::trunc);
    rpt << rep.to_json() << "\n";
    return result;
  };

  for (int epoch = start_epoch; epoch < train_cfg.max_epochs; ++epoch) {
    const double lr = lr_at_epoch(effective_base, epoch, train_cfg.decay_factor,
                                  train_cfg.decay_every);
    EpochStream stream(train_store, train_index, datagen_cfg, train_cfg.seed, epoch);

    model.params().zero_grads();
    double loss_sum = 0.0;
    int in_group = 0;
    auto flush_update = [&]() {
      scale_gradients(model.params(), static_cast<double>(in_group));
      clip_gradients(model.params(), train_cfg.clip_norm);
      adam.step(model.params(), lr);
      model.params().zero_grads();
      in_group = 0;
    };

    for (int64_t i = 0; i < stream.size(); ++i) {
      TrainingExample ex = stream.at(i);
      ComplexSpectrogram mix_spec = stft(ex.mixture, model_cfg.frame_params);
      ComplexSpectrogram ref_spec = stft(ex.target, model_cfg.frame_params);
      ag::Var est = model.forward(mix_spec);
      ag::Var loss = loss_graph(est, ref_spec, ex.target, train_cfg.loss_domain);
      const double value = loss->value.data()[0];
      if (!std::isfinite(value)) {
        append_jsonl(log_path, json{{"event", "non-finite-loss"},
                                    {"epoch", epoch},
                                    {"example", i},
                                    {"loss", std::isnan(value) ? "nan" : "inf"}});
        return finish("aborted-non-finite");
      }
      loss_sum += value;
      ag::backward(loss);
      if (++in_group == group) flush_update();
    }
    if (in_group > 0) flush_update();

    const double train_loss = loss_sum / static_cast<double>(stream.size());
    const double val = validate_model(model, valid_store, datagen_cfg.target, options.inference,
                                      train_cfg.monitor, train_cfg.loss_domain);
    const bool stop = stopper.update(val, epoch);

    CheckpointState state = make_state(epoch, train_cfg.seed, train_cfg.monitor, stopper);
    save_checkpoint(last_path.string(), model, state, &adam);
    if (stopper.best_epoch() == epoch) save_checkpoint(best_path.string(), model, state, &adam);

    append_jsonl(log_path, json{{"epoch", epoch},
                                {"train_loss", train_loss},
                                {"val", val},
                                {"monitor", to_string(train_cfg.monitor)},
                                {"lr", lr},
                                {"examples", stream.size()},
                                {"wall_h", hours()}});
    result.epoch_losses.push_back(train_loss);
    result.epoch_metrics.push_back(val);
    result.epochs_completed = epoch + 1;
    if (stop) return finish("early-stopped");
  }
  return finish("completed");
}

}  // namespace bsrnn
