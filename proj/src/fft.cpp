// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

namespace bsrnn::fft {
namespace {

// FFTW's planner is not thread-safe; execution on a plan's own buffers is.
// Each thread keeps its own plans + aligned buffers per transform size.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanPair {
  size_t n = 0;
  double* real = nullptr;
  fftw_complex* cpx = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit PlanPair(size_t size) : n(size) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    real = fftw_alloc_real(n);
    cpx = fftw_alloc_complex(n / 2 + 1);
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, cpx, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), cpx, real, FFTW_ESTIMATE);
    if (!fwd || !inv) throw std::runtime_error("fftw plan creation failed");
  }
  ~PlanPair() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
    if (real) fftw_free(real);
    if (cpx) fftw_free(cpx);
  }
  PlanPair(const PlanPair&) = delete;
  PlanPair& operator=(const PlanPair&) = delete;
};

PlanPair& plans_for(size_t n) {
  thread_local std::unordered_map<size_t, std::unique_ptr<PlanPair>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::make_unique<PlanPair>(n)).first;
  return *it->second;
}

void check_size(size_t n) {
  if (n < 2 || (n % 2) != 0) throw std::invalid_argument("fft size must be even and >= 2");
}

}  // namespace

void rfft(const double* in, size_t n, std::complex<double>* out) {
  check_size(n);
  PlanPair& p = plans_for(n);
  std::memcpy(p.real, in, n * sizeof(double));
  fftw_execute(p.fwd);
  std::memcpy(out, p.cpx, (n / 2 + 1) * sizeof(std::complex<double>));
}

void irfft(const std::complex<double>* in, size_t n, double* out) {
  check_size(n);
  PlanPair& p = plans_for(n);
  std::memcpy(p.cpx, in, (n / 2 + 1) * sizeof(std::complex<double>));
  // DC and Nyquist are real for any real signal; drop stray imaginary parts
  // rather than leave their effect to the backend.
  p.cpx[0][1] = 0.0;
  p.cpx[n / 2][1] = 0.0;
  fftw_execute(p.inv);
  const double scale = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) out[i] = p.real[i] * scale;
}

}  // namespace bsrnn::fft
