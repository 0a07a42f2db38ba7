// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bsrnn/spectral.hpp"

namespace bsrnn {

InferenceMethod inference_method_from_string(const std::string& s) {
  if (s == "ola") return InferenceMethod::kOla;
  if (s == "fader") return InferenceMethod::kFader;
  throw std::invalid_argument("unknown inference method: " + s);
}

std::string to_string(InferenceMethod m) {
  return m == InferenceMethod::kOla ? "ola" : "fader";
}

void InferenceConfig::validate() const {
  if (ola_segment_s <= 0.0 || ola_hop_s <= 0.0 || ola_hop_s > ola_segment_s)
    throw std::invalid_argument("ola needs 0 < hop <= segment");
  if (fader_segment_s <= 0.0 || fader_overlap < 0.0 || fader_overlap >= 1.0)
    throw std::invalid_argument("fader needs segment > 0 and overlap in [0, 1)");
}

Waveform ModelSegmentProcessor::process(const Waveform& segment) {
  const ComplexSpectrogram mix = stft(segment, model_.config().frame_params);
  const ComplexSpectrogram est = model_.separate(mix);
  return istft(est, segment.length);
}

std::pair<std::vector<double>, std::vector<double>> fade_weights(int64_t overlap_len) {
  if (overlap_len < 0) throw std::invalid_argument("overlap must be non-negative");
  std::vector<double> ramp_out(static_cast<size_t>(overlap_len));
  std::vector<double> ramp_in(static_cast<size_t>(overlap_len));
  for (int64_t i = 0; i < overlap_len; ++i) {
    const double w = static_cast<double>(i + 1) / static_cast<double>(overlap_len + 1);
    ramp_in[static_cast<size_t>(i)] = w;
    ramp_out[static_cast<size_t>(i)] = 1.0 - w;
  }
  return {std::move(ramp_out), std::move(ramp_in)};
}

namespace {

Waveform segment_of(const Waveform& song, int64_t start, int64_t len) {
  Waveform seg(song.channels, len, song.sample_rate);
  for (int c = 0; c < song.channels; ++c)
    for (int64_t i = 0; i < len; ++i) seg.at(c, i) = song.at(c, start + i);
  return seg;
}

void check_estimate(const Waveform& est, int channels, int64_t len) {
  if (est.channels != channels || est.length != len)
    throw std::runtime_error("segment processor changed the segment shape");
}

}  // namespace

Waveform separate_ola(const Waveform& song, SegmentProcessor& proc, const InferenceConfig& cfg) {
  cfg.validate();
  const int64_t L = song.length;
  const int64_t seg = std::max<int64_t>(1, std::llround(cfg.ola_segment_s * song.sample_rate));
  const int64_t hop = std::min<int64_t>(
      seg, std::max<int64_t>(1, std::llround(cfg.ola_hop_s * song.sample_rate)));

  Waveform out(song.channels, L, song.sample_rate);
  if (L == 0) return out;
  if (seg >= L) {
    Waveform est = proc.process(song);
    check_estimate(est, song.channels, L);
    return est;
  }

  std::vector<double> coverage(static_cast<size_t>(L), 0.0);
  for (int64_t p = 0; p < L; p += hop) {
    const int64_t len = std::min(seg, L - p);
    Waveform est = proc.process(segment_of(song, p, len));
    check_estimate(est, song.channels, len);
    for (int c = 0; c < song.channels; ++c)
      for (int64_t i = 0; i < len; ++i) out.at(c, p + i) += est.at(c, i);
    for (int64_t i = 0; i < len; ++i) coverage[static_cast<size_t>(p + i)] += 1.0;
  }
  for (int c = 0; c < song.channels; ++c)
    for (int64_t i = 0; i < L; ++i) out.at(c, i) /= coverage[static_cast<size_t>(i)];
  return out;
}

Waveform separate_fader(const Waveform& song, SegmentProcessor& proc,
                        const InferenceConfig& cfg) {
  cfg.validate();
  const int64_t L = song.length;
  const int64_t seg = std::max<int64_t>(1, std::llround(cfg.fader_segment_s * song.sample_rate));
  const int64_t overlap = std::min<int64_t>(
      seg - 1, std::llround(cfg.fader_overlap * static_cast<double>(seg)));
  const int64_t step = seg - overlap;

  Waveform out(song.channels, L, song.sample_rate);
  if (L == 0) return out;

  const auto [ramp_out, ramp_in] = fade_weights(overlap);
  // Weight sums are accumulated and divided out so the crossfade stays exact
  // even when rounding (or an overlap above 50%) makes raw weights sum != 1.
  std::vector<double> weight(static_cast<size_t>(L), 0.0);
  int64_t p = 0;
  bool first = true;
  while (true) {
    const bool last = p + seg >= L;
    const int64_t len = std::min(seg, L - p);
    Waveform est = proc.process(segment_of(song, p, len));
    check_estimate(est, song.channels, len);
    for (int64_t i = 0; i < len; ++i) {
      double w = 1.0;
      if (!first && i < overlap) w *= ramp_in[static_cast<size_t>(i)];
      if (!last && i >= len - overlap) w *= ramp_out[static_cast<size_t>(i - (len - overlap))];
      weight[static_cast<size_t>(p + i)] += w;
      for (int c = 0; c < song.channels; ++c) out.at(c, p + i) += w * est.at(c, i);
    }
    if (last) break;
    p += step;
    first = false;
  }
  for (int c = 0; c < song.channels; ++c)
    for (int64_t i = 0; i < L; ++i) out.at(c, i) /= weight[static_cast<size_t>(i)];
  return out;
}

Waveform separate(const Waveform& song, SegmentProcessor& proc, const InferenceConfig& cfg) {
  return cfg.method == InferenceMethod::kOla ? separate_ola(song, proc, cfg)
                                             : separate_fader(song, proc, cfg);
}

}  // namespace bsrnn
