// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bsrnn/optim.hpp"
#include "doctest.h"

using namespace bsrnn;

namespace {

ModelConfig tiny_config() {
  ModelConfig mc;
  mc.latent_dim = 8;
  mc.depth = 1;
  mc.masker_factor = 2;
  mc.scheme.source_name = "tiny";
  mc.scheme.bands = {{0, 8}, {8, 17}};
  mc.scheme.n_bins = 17;
  mc.frame_params = {32, 8};
  return mc;
}

std::filesystem::path tmp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("bsrnn_ckpt_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ComplexSpectrogram probe_spec() {
  ComplexSpectrogram spec({32, 8}, 2, 17, 10, 1000);
  for (int c = 0; c < spec.channels; ++c)
    for (int f = 0; f < spec.f_bins; ++f)
      for (int64_t t = 0; t < spec.frames; ++t)
        spec.at(c, f, t) = {std::sin(0.3 * f + 0.7 * t + c), std::cos(0.5 * f - 0.2 * t)};
  return spec;
}

// Deterministic fake gradients so optimizer trajectories can be replayed.
void set_grads(SeparationModel& model, int step) {
  for (const auto& [name, var] : model.params().entries()) {
    Tensor& g = var->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i)
      g.data()[i] = std::sin(0.01 * static_cast<double>(i + 1) * (step + 1) +
                             static_cast<double>(name.size()));
  }
}

bool params_equal(const SeparationModel& a, const SeparationModel& b) {
  const auto& ea = a.params().entries();
  const auto& eb = b.params().entries();
  if (ea.size() != eb.size()) return false;
  for (size_t i = 0; i < ea.size(); ++i) {
    if (ea[i].first != eb[i].first) return false;
    const Tensor& ta = ea[i].second->value;
    const Tensor& tb = eb[i].second->value;
    if (ta.shape() != tb.shape()) return false;
    for (int64_t k = 0; k < ta.numel(); ++k)
      if (ta.data()[k] != tb.data()[k]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("weights and state survive a save/load round trip") {
  auto dir = tmp_dir("roundtrip");
  auto path = (dir / "model.ckpt").string();

  SeparationModel model(tiny_config(), 42);
  CheckpointState state;
  state.epoch = 5;
  state.seed = 42;
  state.monitor = "uSDR";
  state.has_best = true;
  state.best_value = 7.25;
  state.best_epoch = 3;
  state.epochs_since_best = 2;
  save_checkpoint(path, model, state);

  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));

  CheckpointState back;
  SeparationModel loaded = load_checkpoint(path, &back);
  CHECK(params_equal(model, loaded));
  CHECK(back.epoch == 5);
  CHECK(back.seed == 42);
  CHECK(back.monitor == "uSDR");
  CHECK(back.has_best);
  CHECK(back.best_value == 7.25);
  CHECK(back.best_epoch == 3);
  CHECK(back.epochs_since_best == 2);

  // Same config, same weights: the forward pass must match bitwise.
  ComplexSpectrogram spec = probe_spec();
  ComplexSpectrogram ya = model.separate(spec);
  ComplexSpectrogram yb = loaded.separate(spec);
  REQUIRE(ya.data.size() == yb.data.size());
  for (size_t i = 0; i < ya.data.size(); ++i) CHECK(ya.data[i] == yb.data[i]);
  std::filesystem::remove_all(dir);
}

TEST_CASE("header metadata lists parameters in registration order") {
  auto dir = tmp_dir("meta");
  auto path = (dir / "model.ckpt").string();
  SeparationModel model(tiny_config(), 1);
  save_checkpoint(path, model, CheckpointState{});

  CheckpointMeta meta = read_checkpoint_meta(path);
  CHECK(meta.version == 1);
  CHECK_FALSE(meta.has_optimizer);
  CHECK(meta.model.latent_dim == 8);
  CHECK(meta.model.scheme.bands == tiny_config().scheme.bands);
  const auto& entries = model.params().entries();
  REQUIRE(meta.params.size() == entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    CHECK(meta.params[i].first == entries[i].first);
    CHECK(meta.params[i].second == entries[i].second->value.shape());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("optimizer state resumes the exact adam trajectory") {
  auto dir = tmp_dir("adam");
  auto path = (dir / "resume.ckpt").string();

  // Uninterrupted reference: five steps.
  SeparationModel ref(tiny_config(), 7);
  AdamOptimizer ref_opt;
  for (int s = 0; s < 5; ++s) {
    set_grads(ref, s);
    ref_opt.step(ref.params(), 1e-3 / (1 + s));
  }

  // Same thing split by a checkpoint after step three.
  SeparationModel a(tiny_config(), 7);
  AdamOptimizer a_opt;
  for (int s = 0; s < 3; ++s) {
    set_grads(a, s);
    a_opt.step(a.params(), 1e-3 / (1 + s));
  }
  CheckpointState state;
  state.epoch = 0;
  state.seed = 7;
  save_checkpoint(path, a, state, &a_opt);

  AdamOptimizer b_opt;
  SeparationModel b = load_checkpoint(path, nullptr, &b_opt);
  CHECK(b_opt.steps_taken() == 3);
  for (int s = 3; s < 5; ++s) {
    set_grads(b, s);
    b_opt.step(b.params(), 1e-3 / (1 + s));
  }
  CHECK(params_equal(ref, b));

  CheckpointMeta meta = read_checkpoint_meta(path);
  CHECK(meta.has_optimizer);
  CHECK(meta.adam_t == 3);
  std::filesystem::remove_all(dir);
}

TEST_CASE("loading rejects damaged or mismatched files") {
  auto dir = tmp_dir("reject");
  auto good = (dir / "good.ckpt").string();
  SeparationModel model(tiny_config(), 3);
  save_checkpoint(good, model, CheckpointState{});

  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_checkpoint((dir / "nope.ckpt").string()),
                         doctest::Contains("nope.ckpt"), std::runtime_error);
  }
  SUBCASE("wrong magic") {
    auto bad = (dir / "bad.ckpt").string();
    std::ofstream out(bad, std::ios::binary);
    out << "RIFFnope this is not a checkpoint";
    out.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(bad), doctest::Contains("not a checkpoint"),
                         std::runtime_error);
  }
  SUBCASE("future version") {
    auto bad = (dir / "vers.ckpt").string();
    std::filesystem::copy_file(good, bad);
    std::fstream f(bad, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(8);
    uint32_t v = 99;
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(bad), doctest::Contains("version 99"),
                         std::runtime_error);
  }
  SUBCASE("truncated payload") {
    auto bad = (dir / "trunc.ckpt").string();
    std::filesystem::copy_file(good, bad);
    std::filesystem::resize_file(bad, std::filesystem::file_size(bad) - 64);
    CHECK_THROWS_WITH_AS(load_checkpoint(bad), doctest::Contains("truncated"),
                         std::runtime_error);
  }
  SUBCASE("optimizer requested but absent") {
    AdamOptimizer opt;
    CHECK_THROWS_WITH_AS(load_checkpoint(good, nullptr, &opt),
                         doctest::Contains("no optimizer state"), std::runtime_error);
  }
  std::filesystem::remove_all(dir);
}
