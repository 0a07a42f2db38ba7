// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_SPECTRAL_HPP_
#define BSRNN_SPECTRAL_HPP_

#include <complex>
#include <cstdint>
#include <vector>

#include "bsrnn/waveform.hpp"

namespace bsrnn {

// Channel-major complex spectrogram: channels * f_bins * frames, with the
// frame index fastest so one bin's trajectory is contiguous.
struct ComplexSpectrogram {
  FrameParams fp;
  int sample_rate = kDefaultSampleRate;
  int channels = 0;
  int f_bins = 0;
  int64_t frames = 0;
  std::vector<std::complex<double>> data;

  ComplexSpectrogram() = default;
  ComplexSpectrogram(FrameParams params, int chans, int bins, int64_t n_frames,
                     int rate = kDefaultSampleRate)
      : fp(params), sample_rate(rate), channels(chans), f_bins(bins), frames(n_frames),
        data(static_cast<size_t>(chans) * bins * n_frames, {0.0, 0.0}) {}

  std::complex<double>& at(int c, int f, int64_t t) {
    return data[(static_cast<size_t>(c) * f_bins + f) * frames + t];
  }
  std::complex<double> at(int c, int f, int64_t t) const {
    return data[(static_cast<size_t>(c) * f_bins + f) * frames + t];
  }

  bool same_layout(const ComplexSpectrogram& other) const {
    return fp == other.fp && channels == other.channels && f_bins == other.f_bins &&
           frames == other.frames;
  }
};

// Periodic Hann window of the given size.
std::vector<double> hann_window(int size);

// Frame count for a signal of the given length under centered framing.
int64_t stft_frame_count(int64_t length, const FrameParams& fp);

// Centered STFT with reflective padding at both edges. window_size must be
// even and > hop > 0. Throws on non-finite input samples.
ComplexSpectrogram stft(const Waveform& wav, const FrameParams& fp);

// Weighted overlap-add inverse. target_length selects how many samples of the
// centered reconstruction to keep; the result is exact wherever the window
// overlap accumulates nonzero weight. Throws if the accumulated window norm
// over the retained region falls below 1e-8.
Waveform istft(const ComplexSpectrogram& spec, int64_t target_length);

// Adjoint of istft as a linear map from spectrogram to waveform, used to pull
// time-domain gradients back into the spectrogram domain. grad_wave must have
// the length that istft produced.
ComplexSpectrogram istft_adjoint(const Waveform& grad_wave, const FrameParams& fp,
                                 int channels, int f_bins, int64_t frames, int sample_rate);

}  // namespace bsrnn

#endif  // BSRNN_SPECTRAL_HPP_
