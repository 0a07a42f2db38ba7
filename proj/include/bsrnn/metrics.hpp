// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_METRICS_HPP_
#define BSRNN_METRICS_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bsrnn/waveform.hpp"

namespace bsrnn {

// Caps keep means finite when the error energy underflows (or explodes).
constexpr double kSdrCapDb = 60.0;

// Whole-signal energy-ratio SDR, channels pooled, clamped to +-60 dB.
// A silent reference has no defined value.
std::optional<double> sdr(const Waveform& ref, const Waveform& est);

// Mean of per-song sdr values; silent-reference songs are skipped.
double usdr(const std::vector<std::pair<Waveform, Waveform>>& song_pairs);

// Median SDR over consecutive 1 s chunks; the trailing partial chunk is
// dropped and silent-reference chunks are excluded from the median.
std::optional<double> csdr_song(const Waveform& ref, const Waveform& est);

// Median across songs (midpoint convention for even counts).
double csdr_aggregate(const std::vector<double>& per_song);

double median(std::vector<double> values);

struct EvaluationRow {
  std::string song;
  std::string source;
  double usdr_db = 0.0;
  double csdr_db = 0.0;
};

// Chunk SDR here is the windowed energy-ratio form with median-of-medians
// aggregation, not the BSS-Eval distortion-filter projection; the header
// carries that caveat so numbers are never compared across definitions.
struct EvaluationReport {
  std::string header =
      "SDR definition: energy-ratio, channels pooled, +-60 dB cap; "
      "cSDR = median over 1 s chunks then median over songs (no "
      "distortion-filter projection)";
  std::vector<EvaluationRow> rows;

  std::map<std::string, double> mean_usdr_per_source() const;
  std::map<std::string, double> median_csdr_per_source() const;
  double mean_usdr_all_sources() const;
  double median_csdr_all_sources() const;
  std::string to_table() const;
  std::string to_json() const;
};

}  // namespace bsrnn

#endif  // BSRNN_METRICS_HPP_
