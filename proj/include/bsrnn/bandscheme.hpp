// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_BANDSCHEME_HPP_
#define BSRNN_BANDSCHEME_HPP_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bsrnn/spectral.hpp"
#include "bsrnn/tensor.hpp"

namespace bsrnn {

// Contiguous partition of the frequency axis into bands, [start, end) bins.
struct BandScheme {
  std::string source_name;
  std::vector<std::pair<int, int>> bands;
  int n_bins = 0;

  int num_bands() const { return static_cast<int>(bands.size()); }
  int width(int k) const { return bands[k].second - bands[k].first; }

  // Throws unless the bands are sorted, non-empty, and cover [0, n_bins).
  void validate() const;
};

// One run of equal-width bands ending at upper_edge_hz. Runs are listed in
// ascending order; each starts where the previous one ended (0 Hz first).
struct HzRange {
  double upper_edge_hz = 0.0;
  double band_width_hz = 0.0;
};

// Expands Hz ranges to bin bands for an STFT of n_fft points. Boundaries
// round down to bins; leftover bins above the last edge join the last band.
// Throws if any band comes out empty at this resolution.
BandScheme scheme_from_hz_ranges(const std::string& name, const std::vector<HzRange>& ranges,
                                 int n_fft, int sample_rate);

// Built-in Hz ranges for vocals, bass, drums, other.
const std::vector<HzRange>& default_hz_ranges(const std::string& source);

// Default scheme for one of the four sources. Unknown sources throw.
BandScheme build_scheme(const std::string& source, int n_fft, int sample_rate);

// Reads a {source: [[upper_edge_hz, band_width_hz], ...]} JSON file.
std::map<std::string, std::vector<HzRange>> load_scheme_config(const std::string& json_path);

// Slices a spectrogram into per-band real tensors [C, 2*w_k, T]; rows 0..w_k
// hold real parts, rows w_k..2*w_k imaginary parts.
std::vector<Tensor> split(const ComplexSpectrogram& spec, const BandScheme& scheme);

// Reassembles per-band tensors [C, 2*w_k, T] into a fullband spectrogram.
// Inverse of split for matching scheme and layout.
ComplexSpectrogram merge_mask(const std::vector<Tensor>& subbands, const BandScheme& scheme,
                              const FrameParams& fp, int sample_rate);

}  // namespace bsrnn

#endif  // BSRNN_BANDSCHEME_HPP_
