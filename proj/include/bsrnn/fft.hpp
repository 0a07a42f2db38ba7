// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_FFT_HPP_
#define BSRNN_FFT_HPP_

#include <complex>
#include <cstddef>

namespace bsrnn::fft {

// Real-to-complex forward DFT of length n (n even, >= 2).
// out has n/2 + 1 bins, unnormalised: out[k] = sum_n in[n] e^{-i 2 pi k n / N}.
void rfft(const double* in, size_t n, std::complex<double>* out);

// Inverse of rfft with 1/n normalisation; in has n/2 + 1 bins.
void irfft(const std::complex<double>* in, size_t n, double* out);

}  // namespace bsrnn::fft

#endif  // BSRNN_FFT_HPP_
