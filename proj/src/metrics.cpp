// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace bsrnn {

namespace {

double clamp_db(double db) { return std::clamp(db, -kSdrCapDb, kSdrCapDb); }

std::optional<double> sdr_range(const Waveform& ref, const Waveform& est, int64_t start,
                                int64_t len) {
  double ref_e = 0.0, err_e = 0.0;
  for (int c = 0; c < ref.channels; ++c)
    for (int64_t i = start; i < start + len; ++i) {
      const double r = ref.at(c, i);
      const double d = r - est.at(c, i);
      ref_e += r * r;
      err_e += d * d;
    }
  if (ref_e == 0.0) return std::nullopt;
  if (err_e == 0.0) return kSdrCapDb;
  return clamp_db(10.0 * std::log10(ref_e / err_e));
}

}  // namespace

std::optional<double> sdr(const Waveform& ref, const Waveform& est) {
  if (ref.channels != est.channels || ref.length != est.length)
    throw std::invalid_argument("sdr: waveform shapes differ");
  return sdr_range(ref, est, 0, ref.length);
}

double usdr(const std::vector<std::pair<Waveform, Waveform>>& song_pairs) {
  double total = 0.0;
  int64_t n = 0;
  for (const auto& [ref, est] : song_pairs) {
    const auto v = sdr(ref, est);
    if (!v) continue;
    total += *v;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("usdr: no song with a non-silent reference");
  return total / static_cast<double>(n);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::optional<double> csdr_song(const Waveform& ref, const Waveform& est) {
  if (ref.channels != est.channels || ref.length != est.length)
    throw std::invalid_argument("csdr: waveform shapes differ");
  const int64_t chunk = ref.sample_rate;
  const int64_t n_chunks = ref.length / chunk;
  if (n_chunks < 1) throw std::invalid_argument("csdr: song shorter than one chunk");
  std::vector<double> vals;
  for (int64_t k = 0; k < n_chunks; ++k) {
    const auto v = sdr_range(ref, est, k * chunk, chunk);
    if (v) vals.push_back(*v);
  }
  if (vals.empty()) return std::nullopt;
  return median(std::move(vals));
}

double csdr_aggregate(const std::vector<double>& per_song) { return median(per_song); }

std::map<std::string, double> EvaluationReport::mean_usdr_per_source() const {
  std::map<std::string, double> sums;
  std::map<std::string, int> counts;
  for (const auto& r : rows) {
    sums[r.source] += r.usdr_db;
    counts[r.source] += 1;
  }
  for (auto& [src, s] : sums) s /= counts[src];
  return sums;
}

std::map<std::string, double> EvaluationReport::median_csdr_per_source() const {
  std::map<std::string, std::vector<double>> vals;
  for (const auto& r : rows) vals[r.source].push_back(r.csdr_db);
  std::map<std::string, double> out;
  for (auto& [src, v] : vals) out[src] = median(std::move(v));
  return out;
}

double EvaluationReport::mean_usdr_all_sources() const {
  const auto per = mean_usdr_per_source();
  if (per.empty()) throw std::invalid_argument("empty report");
  double s = 0.0;
  for (const auto& [src, v] : per) s += v;
  return s / static_cast<double>(per.size());
}

double EvaluationReport::median_csdr_all_sources() const {
  const auto per = median_csdr_per_source();
  if (per.empty()) throw std::invalid_argument("empty report");
  double s = 0.0;
  for (const auto& [src, v] : per) s += v;
  return s / static_cast<double>(per.size());
}

std::string EvaluationReport::to_table() const {
  std::ostringstream os;
  os << "# " << header << "\n";
  os << "song\tsource\tuSDR_dB\tcSDR_dB\n";
  os.precision(4);
  os << std::fixed;
  for (const auto& r : rows)
    os << r.song << "\t" << r.source << "\t" << r.usdr_db << "\t" << r.csdr_db << "\n";
  for (const auto& [src, v] : mean_usdr_per_source()) os << "mean_uSDR\t" << src << "\t" << v << "\t-\n";
  for (const auto& [src, v] : median_csdr_per_source())
    os << "median_cSDR\t" << src << "\t-\t" << v << "\n";
  if (!rows.empty())
    os << "average\tall\t" << mean_usdr_all_sources() << "\t" << median_csdr_all_sources()
       << "\n";
  return os.str();
}

std::string EvaluationReport::to_json() const {
  nlohmann::json j;
  j["header"] = header;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back(
        {{"song", r.song}, {"source", r.source}, {"usdr_db", r.usdr_db}, {"csdr_db", r.csdr_db}});
  if (!rows.empty()) {
    j["mean_usdr_per_source"] = mean_usdr_per_source();
    j["median_csdr_per_source"] = median_csdr_per_source();
    j["mean_usdr_all_sources"] = mean_usdr_all_sources();
    j["median_csdr_all_sources"] = median_csdr_all_sources();
  }
  return j.dump(2);
}

}  // namespace bsrnn
