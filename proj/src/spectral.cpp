// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/spectral.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bsrnn/fft.hpp"

namespace bsrnn {
namespace {

constexpr double kColaFloor = 1e-8;

void check_frame_params(const FrameParams& fp) {
  if (fp.window_size < 2 || fp.window_size % 2 != 0)
    throw std::invalid_argument("window_size must be even and >= 2");
  if (fp.hop < 1 || fp.hop > fp.window_size / 2)
    throw std::invalid_argument("hop must be in [1, window_size/2]");
}

// Reflective padding index without edge repetition: sample -1 maps to 1,
// sample length maps to length-2.
int64_t bounce(int64_t i, int64_t length) {
  if (length == 1) return 0;
  while (i < 0 || i >= length) {
    if (i < 0) i = -i;
    if (i >= length) i = 2 * length - 2 - i;
  }
  return i;
}

// Accumulated squared-window weight at each padded position. The istft and
// its adjoint must divide by the same profile, so both call this.
std::vector<double> synthesis_norm(const FrameParams& fp, int64_t frames) {
  const std::vector<double> win = hann_window(fp.window_size);
  const int64_t padded = (frames - 1) * fp.hop + fp.window_size;
  std::vector<double> norm(padded, 0.0);
  for (int64_t t = 0; t < frames; ++t)
    for (int n = 0; n < fp.window_size; ++n)
      norm[t * fp.hop + n] += win[n] * win[n];
  return norm;
}

}  // namespace

std::vector<double> hann_window(int size) {
  std::vector<double> w(size);
  for (int n = 0; n < size; ++n)
    w[n] = 0.5 * (1.0 - std::cos(2.0 * M_PI * n / size));
  return w;
}

int64_t stft_frame_count(int64_t length, const FrameParams& fp) {
  return 1 + length / fp.hop;
}

ComplexSpectrogram stft(const Waveform& wav, const FrameParams& fp) {
  check_frame_params(fp);
  if (wav.channels < 1 || wav.length < 1)
    throw std::invalid_argument("stft needs a non-empty waveform");
  if (!wav.all_finite()) throw std::invalid_argument("stft input has non-finite samples");

  const int W = fp.window_size;
  const int half = W / 2;
  const int f_bins = half + 1;
  const int64_t frames = stft_frame_count(wav.length, fp);
  const std::vector<double> win = hann_window(W);

  ComplexSpectrogram spec(fp, wav.channels, f_bins, frames, wav.sample_rate);
  std::vector<double> frame(W);
  std::vector<std::complex<double>> bins(f_bins);
  for (int c = 0; c < wav.channels; ++c) {
    const double* x = wav.channel(c);
    for (int64_t t = 0; t < frames; ++t) {
      const int64_t start = t * fp.hop - half;
      for (int n = 0; n < W; ++n)
        frame[n] = win[n] * x[bounce(start + n, wav.length)];
      fft::rfft(frame.data(), W, bins.data());
      for (int f = 0; f < f_bins; ++f) spec.at(c, f, t) = bins[f];
    }
  }
  return spec;
}

Waveform istft(const ComplexSpectrogram& spec, int64_t target_length) {
  check_frame_params(spec.fp);
  const int W = spec.fp.window_size;
  const int half = W / 2;
  if (spec.f_bins != half + 1)
    throw std::invalid_argument("spectrogram bin count does not match window");
  if (spec.channels < 1 || spec.frames < 1)
    throw std::invalid_argument("istft needs a non-empty spectrogram");
  const int64_t padded = (spec.frames - 1) * spec.fp.hop + W;
  if (target_length < 1 || half + target_length > padded)
    throw std::invalid_argument("target_length outside reconstructable range");

  const std::vector<double> win = hann_window(W);
  const std::vector<double> norm = synthesis_norm(spec.fp, spec.frames);
  for (int64_t m = half; m < half + target_length; ++m)
    if (norm[m] < kColaFloor)
      throw std::runtime_error("window/hop pair leaves sample " + std::to_string(m - half) +
                               " uncovered");

  Waveform out(spec.channels, target_length, spec.sample_rate);
  std::vector<std::complex<double>> bins(spec.f_bins);
  std::vector<double> frame(W);
  std::vector<double> acc(padded);
  for (int c = 0; c < spec.channels; ++c) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int64_t t = 0; t < spec.frames; ++t) {
      for (int f = 0; f < spec.f_bins; ++f) bins[f] = spec.at(c, f, t);
      fft::irfft(bins.data(), W, frame.data());
      const int64_t base = t * spec.fp.hop;
      for (int n = 0; n < W; ++n) acc[base + n] += win[n] * frame[n];
    }
    double* y = out.channel(c);
    for (int64_t p = 0; p < target_length; ++p) y[p] = acc[half + p] / norm[half + p];
  }
  return out;
}

ComplexSpectrogram istft_adjoint(const Waveform& grad_wave, const FrameParams& fp,
                                 int channels, int f_bins, int64_t frames, int sample_rate) {
  check_frame_params(fp);
  const int W = fp.window_size;
  const int half = W / 2;
  if (f_bins != half + 1) throw std::invalid_argument("bin count does not match window");
  if (grad_wave.channels != channels)
    throw std::invalid_argument("gradient channel count mismatch");
  const int64_t padded = (frames - 1) * fp.hop + W;
  if (half + grad_wave.length > padded)
    throw std::invalid_argument("gradient longer than reconstructable range");

  const std::vector<double> win = hann_window(W);
  const std::vector<double> norm = synthesis_norm(fp, frames);

  ComplexSpectrogram grad(fp, channels, f_bins, frames, sample_rate);
  std::vector<double> g(W);
  std::vector<std::complex<double>> bins(f_bins);
  for (int c = 0; c < channels; ++c) {
    const double* gy = grad_wave.channel(c);
    for (int64_t t = 0; t < frames; ++t) {
      const int64_t base = t * fp.hop;
      for (int n = 0; n < W; ++n) {
        const int64_t p = base + n - half;  // position in the retained output
        g[n] = (p >= 0 && p < grad_wave.length) ? gy[p] * win[n] / norm[base + n] : 0.0;
      }
      fft::rfft(g.data(), W, bins.data());
      for (int f = 0; f < f_bins; ++f) {
        // Interior bins appear twice in the implicit Hermitian spectrum.
        const double ck = (f == 0 || f == half) ? 1.0 : 2.0;
        std::complex<double> v = bins[f] * (ck / W);
        if (f == 0 || f == half) v = {v.real(), 0.0};
        grad.at(c, f, t) = v;
      }
    }
  }
  return grad;
}

}  // namespace bsrnn
