// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_INFERENCE_HPP_
#define BSRNN_INFERENCE_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bsrnn/model.hpp"
#include "bsrnn/waveform.hpp"

namespace bsrnn {

enum class InferenceMethod { kOla, kFader };

InferenceMethod inference_method_from_string(const std::string& s);
std::string to_string(InferenceMethod m);

struct InferenceConfig {
  InferenceMethod method = InferenceMethod::kOla;
  double ola_segment_s = 3.0;
  double ola_hop_s = 0.5;
  double fader_segment_s = 10.0;
  double fader_overlap = 0.10;  // fraction of the segment

  void validate() const;
};

// Anything that maps an audio segment to an equally shaped estimate.
class SegmentProcessor {
 public:
  virtual ~SegmentProcessor() = default;
  virtual Waveform process(const Waveform& segment) = 0;
};

// STFT -> model -> iSTFT wrapper around one per-source model.
class ModelSegmentProcessor : public SegmentProcessor {
 public:
  explicit ModelSegmentProcessor(const SeparationModel& model) : model_(model) {}
  Waveform process(const Waveform& segment) override;

 private:
  const SeparationModel& model_;
};

// Complementary linear ramps over an overlap; endpoints are interior
// ((i+1)/(L+1)) so no sample is weighted exactly zero on both sides.
std::pair<std::vector<double>, std::vector<double>> fade_weights(int64_t overlap_len);

// Overlapping fixed-hop segments, summed and divided by per-sample coverage.
Waveform separate_ola(const Waveform& song, SegmentProcessor& proc, const InferenceConfig& cfg);

// Long segments joined with linear crossfades over the overlap region.
Waveform separate_fader(const Waveform& song, SegmentProcessor& proc, const InferenceConfig& cfg);

// Dispatch on cfg.method.
Waveform separate(const Waveform& song, SegmentProcessor& proc, const InferenceConfig& cfg);

}  // namespace bsrnn

#endif  // BSRNN_INFERENCE_HPP_
