// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "bsrnn/model.hpp"

namespace bsrnn {

LossDomain loss_domain_from_string(const std::string& s) {
  if (s == "time") return LossDomain::kTime;
  if (s == "stft") return LossDomain::kStft;
  if (s == "time+stft") return LossDomain::kTimePlusStft;
  throw std::invalid_argument("unknown loss domain: " + s);
}

std::string to_string(LossDomain d) {
  switch (d) {
    case LossDomain::kTime: return "time";
    case LossDomain::kStft: return "stft";
    default: return "time+stft";
  }
}

namespace {

void check_pair(const ComplexSpectrogram& ref_spec, const Waveform& ref_wave) {
  if (ref_wave.channels != ref_spec.channels)
    throw std::invalid_argument("loss: waveform/spectrogram channel mismatch");
  if (stft_frame_count(ref_wave.length, ref_spec.fp) != ref_spec.frames)
    throw std::invalid_argument("loss: waveform length does not produce the given frames");
}

Tensor wave_tensor(const Waveform& w) {
  Tensor t({w.channels, w.length});
  std::copy(w.samples.begin(), w.samples.end(), t.data());
  return t;
}

}  // namespace

ag::Var loss_graph(const ag::Var& est, const ComplexSpectrogram& ref_spec,
                   const Waveform& ref_wave, LossDomain domain) {
  if (!est) throw std::invalid_argument("loss: null estimate");
  const Tensor ref_t = spec_to_tensor(ref_spec);
  if (!est->value.same_shape(ref_t))
    throw std::invalid_argument("loss: estimate shape " + Tensor::shape_str(est->value.shape()) +
                                " does not match reference " + Tensor::shape_str(ref_t.shape()));
  check_pair(ref_spec, ref_wave);

  ag::Var total;
  if (domain != LossDomain::kTime)
    total = ag::l1(ag::sub(est, ag::constant(ref_t)));
  if (domain != LossDomain::kStft) {
    const ag::Var est_wave =
        ag::istft_op(est, ref_spec.fp, ref_spec.sample_rate, ref_wave.length);
    ag::Var time_term = ag::l1(ag::sub(est_wave, ag::constant(wave_tensor(ref_wave))));
    total = total ? ag::add(total, time_term) : time_term;
  }
  return total;
}

double compute_loss(const ComplexSpectrogram& est, const ComplexSpectrogram& ref_spec,
                    const Waveform& ref_wave, LossDomain domain) {
  if (!est.same_layout(ref_spec)) throw std::invalid_argument("loss: spectrogram layout mismatch");
  check_pair(ref_spec, ref_wave);

  double total = 0.0;
  if (domain != LossDomain::kTime) {
    for (size_t i = 0; i < est.data.size(); ++i) {
      total += std::abs(est.data[i].real() - ref_spec.data[i].real());
      total += std::abs(est.data[i].imag() - ref_spec.data[i].imag());
    }
  }
  if (domain != LossDomain::kStft) {
    const Waveform est_wave = istft(est, ref_wave.length);
    for (size_t i = 0; i < est_wave.samples.size(); ++i)
      total += std::abs(est_wave.samples[i] - ref_wave.samples[i]);
  }
  return total;
}

}  // namespace bsrnn
