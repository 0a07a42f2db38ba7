// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_LOSS_HPP_
#define BSRNN_LOSS_HPP_

#include <string>

#include "bsrnn/autodiff.hpp"
#include "bsrnn/spectral.hpp"
#include "bsrnn/waveform.hpp"

namespace bsrnn {

enum class LossDomain { kTime, kStft, kTimePlusStft };

LossDomain loss_domain_from_string(const std::string& s);
std::string to_string(LossDomain d);

// L1 over real and imaginary parts plus, in the time domains, L1 against the
// raw target waveform after an inverse transform of the estimate. Returns the
// per-example sum; batch averaging is the caller's business.
ag::Var loss_graph(const ag::Var& est, const ComplexSpectrogram& ref_spec,
                   const Waveform& ref_wave, LossDomain domain);

// Graph-free evaluation of the same quantity.
double compute_loss(const ComplexSpectrogram& est, const ComplexSpectrogram& ref_spec,
                    const Waveform& ref_wave, LossDomain domain);

}  // namespace bsrnn

#endif  // BSRNN_LOSS_HPP_
