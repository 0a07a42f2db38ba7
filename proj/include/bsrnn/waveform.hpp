// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_WAVEFORM_HPP_
#define BSRNN_WAVEFORM_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace bsrnn {

constexpr int kDefaultSampleRate = 44100;

// Channel-major multichannel audio buffer.
struct Waveform {
  int sample_rate = kDefaultSampleRate;
  int channels = 0;
  int64_t length = 0;
  std::vector<double> samples;  // channels * length, channel-major

  Waveform() = default;
  Waveform(int chans, int64_t len, int rate = kDefaultSampleRate)
      : sample_rate(rate), channels(chans), length(len),
        samples(static_cast<size_t>(chans) * static_cast<size_t>(len), 0.0) {
    if (chans < 1 || len < 0) throw std::invalid_argument("bad waveform dims");
  }

  double* channel(int c) { return samples.data() + static_cast<size_t>(c) * length; }
  const double* channel(int c) const { return samples.data() + static_cast<size_t>(c) * length; }

  double& at(int c, int64_t n) { return samples[static_cast<size_t>(c) * length + n]; }
  double at(int c, int64_t n) const { return samples[static_cast<size_t>(c) * length + n]; }

  bool all_finite() const {
    for (double v : samples)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double energy() const {
    double e = 0.0;
    for (double v : samples) e += v * v;
    return e;
  }
};

struct FrameParams {
  int window_size = 2048;
  int hop = 512;

  bool operator==(const FrameParams&) const = default;
};

}  // namespace bsrnn

#endif  // BSRNN_WAVEFORM_HPP_
