// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_MODEL_HPP_
#define BSRNN_MODEL_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bsrnn/autodiff.hpp"
#include "bsrnn/bandscheme.hpp"
#include "bsrnn/rng.hpp"
#include "bsrnn/spectral.hpp"

namespace bsrnn {

enum class StereoMode { kMonoPerChannel, kNaiveStereo, kTac };
enum class TacActivation { kTanh, kPrelu };
enum class BlockKind { kRecurrent, kDilatedConv };

StereoMode stereo_mode_from_string(const std::string& s);
TacActivation tac_activation_from_string(const std::string& s);
BlockKind block_kind_from_string(const std::string& s);
std::string to_string(StereoMode m);
std::string to_string(TacActivation a);
std::string to_string(BlockKind k);

struct ModelConfig {
  int latent_dim = 64;    // N
  int depth = 8;          // R
  int masker_factor = 4;  // hidden width multiplier in the mask MLPs
  StereoMode stereo_mode = StereoMode::kMonoPerChannel;
  TacActivation tac_activation = TacActivation::kTanh;
  BlockKind block_kind = BlockKind::kRecurrent;
  int attention_heads = 0;  // 0 disables the attention sub-layer
  int attention_dim = 0;    // per-head query/key encoding width
  int heads = 1;            // feature-split heads inside each block
  std::vector<int> conv_dilations = {1, 2, 4};
  int conv_kernel = 3;
  int conv_hidden_factor = 2;
  BandScheme scheme;
  FrameParams frame_params{2048, 512};

  void validate() const;
  bool attention_enabled() const { return attention_heads > 0; }
};

// Named parameter registry with deterministic registration order.
class ParamStore {
 public:
  ag::Var add(const std::string& name, Tensor init);
  const ag::Var& at(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, ag::Var>>& entries() const { return entries_; }
  int64_t total_size() const;
  void zero_grads();

 private:
  std::vector<std::pair<std::string, ag::Var>> entries_;
  std::map<std::string, size_t> index_;
};

// Band-split separation network for one source: per-band projection into an
// N-dim latent, R pairs of residual blocks alternating across frames and
// bands, and per-band mask MLPs whose complex output multiplies the input.
class SeparationModel {
 public:
  SeparationModel(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Per-band inputs [cin, 2w_k, T] -> latent [K, N, T].
  ag::Var forward_bandsplit(const std::vector<ag::Var>& bands) const;

  // One residual block. axis 0 models across frames, axis 1 across bands.
  ag::Var forward_block(const ag::Var& latent, int r, int axis) const;

  // Cross-channel transform-average-concatenate exchange after pair r.
  std::vector<ag::Var> forward_tac(const std::vector<ag::Var>& latents, int r) const;

  // Latent -> per-band masks [mask_channels, 2w_k, T].
  std::vector<ag::Var> forward_masker(const ag::Var& latent) const;

  // Full pipeline: mixture spectrogram -> estimated source as a graph value
  // [C, 2F, T] (real rows above imaginary rows).
  ag::Var forward(const ComplexSpectrogram& mix) const;

  // Inference wrapper: no-grad forward returned as a spectrogram.
  ComplexSpectrogram separate(const ComplexSpectrogram& mix) const;

 private:
  ag::Var masks_to_spec_graph(const std::vector<ag::Var>& masks,
                              const std::vector<Tensor>& mix_bands) const;

  ModelConfig cfg_;
  ParamStore params_;
};

// Learnable-scalar count for one source model, computed without allocating.
int64_t count_params(const ModelConfig& cfg);

// Graph form [C, 2F, T] of a spectrogram, and back.
Tensor spec_to_tensor(const ComplexSpectrogram& spec);
ComplexSpectrogram tensor_to_spec(const Tensor& t, const FrameParams& fp, int sample_rate);

}  // namespace bsrnn

#endif  // BSRNN_MODEL_HPP_
