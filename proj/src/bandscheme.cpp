// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/bandscheme.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace bsrnn {
namespace {

// Per-source splits from the original band-split publication: fine bands in
// the source's active register, coarser above, one catch-all to Nyquist.
const std::map<std::string, std::vector<HzRange>>& builtin_ranges() {
  static const std::map<std::string, std::vector<HzRange>> table = {
      {"vocals",
       {{1000, 100}, {4000, 250}, {8000, 500}, {16000, 1000}, {20000, 2000}, {22050, 2050}}},
      {"bass",
       {{500, 50}, {1000, 100}, {4000, 500}, {8000, 1000}, {16000, 2000}, {22050, 6050}}},
      {"drums",
       {{1000, 50}, {2000, 100}, {4000, 250}, {8000, 500}, {16000, 1000}, {22050, 6050}}},
      {"other",
       {{1000, 100}, {4000, 250}, {8000, 500}, {16000, 1000}, {20000, 2000}, {22050, 2050}}},
  };
  return table;
}

std::vector<HzRange> parse_ranges(const nlohmann::json& arr, const std::string& source) {
  if (!arr.is_array() || arr.empty())
    throw std::runtime_error("scheme for '" + source + "' must be a non-empty array");
  std::vector<HzRange> out;
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 2)
      throw std::runtime_error("scheme entries must be [upper_edge_hz, band_width_hz] pairs");
    out.push_back({item[0].get<double>(), item[1].get<double>()});
  }
  return out;
}

}  // namespace

void BandScheme::validate() const {
  if (bands.empty()) throw std::invalid_argument("scheme has no bands");
  if (n_bins < 1) throw std::invalid_argument("scheme has no bins");
  int expect = 0;
  for (const auto& [lo, hi] : bands) {
    if (lo != expect) throw std::invalid_argument("bands must tile the bin axis contiguously");
    if (hi <= lo) throw std::invalid_argument("empty band");
    expect = hi;
  }
  if (expect != n_bins) throw std::invalid_argument("bands do not cover all bins");
}

BandScheme scheme_from_hz_ranges(const std::string& name, const std::vector<HzRange>& ranges,
                                 int n_fft, int sample_rate) {
  if (n_fft < 2 || n_fft % 2 != 0) throw std::invalid_argument("n_fft must be even and >= 2");
  if (sample_rate < 1) throw std::invalid_argument("sample_rate must be positive");
  const int f_bins = n_fft / 2 + 1;
  const double nyquist = sample_rate / 2.0;

  // Expand runs of equal-width bands into Hz boundaries first.
  std::vector<double> edges = {0.0};
  for (const auto& r : ranges) {
    if (r.upper_edge_hz <= edges.back() || r.band_width_hz <= 0.0)
      throw std::invalid_argument("scheme ranges must ascend with positive widths");
    if (r.upper_edge_hz > nyquist + 1e-9)
      throw std::invalid_argument("scheme range exceeds Nyquist");
    double lo = edges.back();
    // Last band of a run absorbs any fractional remainder up to the edge.
    const int n = std::max<int>(1, static_cast<int>(std::ceil(
                                       (r.upper_edge_hz - lo) / r.band_width_hz - 1e-9)));
    for (int i = 1; i < n; ++i) edges.push_back(lo + i * r.band_width_hz);
    edges.push_back(r.upper_edge_hz);
  }

  BandScheme scheme;
  scheme.source_name = name;
  scheme.n_bins = f_bins;
  int prev = 0;
  for (size_t i = 1; i < edges.size(); ++i) {
    int hi = static_cast<int>(std::floor(edges[i] * n_fft / sample_rate));
    if (i + 1 == edges.size()) hi = f_bins;  // leftover bins join the last band
    if (hi <= prev)
      throw std::invalid_argument("band near " + std::to_string(edges[i]) +
                                  " Hz is empty at this FFT resolution");
    scheme.bands.emplace_back(prev, hi);
    prev = hi;
  }
  scheme.validate();
  return scheme;
}

const std::vector<HzRange>& default_hz_ranges(const std::string& source) {
  const auto& table = builtin_ranges();
  auto it = table.find(source);
  if (it == table.end()) throw std::invalid_argument("no default band scheme for '" + source + "'");
  return it->second;
}

BandScheme build_scheme(const std::string& source, int n_fft, int sample_rate) {
  return scheme_from_hz_ranges(source, default_hz_ranges(source), n_fft, sample_rate);
}

std::map<std::string, std::vector<HzRange>> load_scheme_config(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open scheme config: " + json_path);
  nlohmann::json doc = nlohmann::json::parse(in);
  if (!doc.is_object()) throw std::runtime_error("scheme config must be a JSON object");
  std::map<std::string, std::vector<HzRange>> out;
  for (const auto& [source, arr] : doc.items()) out[source] = parse_ranges(arr, source);
  return out;
}

std::vector<Tensor> split(const ComplexSpectrogram& spec, const BandScheme& scheme) {
  scheme.validate();
  if (spec.f_bins != scheme.n_bins)
    throw std::invalid_argument("spectrogram bin count does not match scheme");
  std::vector<Tensor> out;
  out.reserve(scheme.bands.size());
  for (const auto& [lo, hi] : scheme.bands) {
    const int w = hi - lo;
    Tensor band({spec.channels, 2 * w, spec.frames});
    for (int c = 0; c < spec.channels; ++c)
      for (int f = 0; f < w; ++f)
        for (int64_t t = 0; t < spec.frames; ++t) {
          const std::complex<double> v = spec.at(c, lo + f, t);
          band.at(c, f, t) = v.real();
          band.at(c, w + f, t) = v.imag();
        }
    out.push_back(std::move(band));
  }
  return out;
}

ComplexSpectrogram merge_mask(const std::vector<Tensor>& subbands, const BandScheme& scheme,
                              const FrameParams& fp, int sample_rate) {
  scheme.validate();
  if (subbands.size() != scheme.bands.size())
    throw std::invalid_argument("subband count does not match scheme");
  if (subbands.empty() || subbands[0].rank() != 3)
    throw std::invalid_argument("subbands must be [C, 2w, T] tensors");
  const int channels = static_cast<int>(subbands[0].dim(0));
  const int64_t frames = subbands[0].dim(2);

  ComplexSpectrogram spec(fp, channels, scheme.n_bins, frames, sample_rate);
  for (size_t k = 0; k < subbands.size(); ++k) {
    const auto& [lo, hi] = scheme.bands[k];
    const int w = hi - lo;
    const Tensor& band = subbands[k];
    if (band.rank() != 3 || band.dim(0) != channels || band.dim(1) != 2 * w ||
        band.dim(2) != frames)
      throw std::invalid_argument("subband " + std::to_string(k) + " has wrong shape");
    for (int c = 0; c < channels; ++c)
      for (int f = 0; f < w; ++f)
        for (int64_t t = 0; t < frames; ++t)
          spec.at(c, lo + f, t) = {band.at(c, f, t), band.at(c, w + f, t)};
  }
  return spec;
}

}  // namespace bsrnn
