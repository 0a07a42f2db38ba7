// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/bandscheme.hpp"

#include <fstream>

#include "bsrnn/rng.hpp"
#include "doctest.h"

using namespace bsrnn;

namespace {

BandScheme random_scheme(int f_bins, Rng& rng) {
  BandScheme s;
  s.source_name = "random";
  s.n_bins = f_bins;
  int lo = 0;
  while (lo < f_bins) {
    int w = 1 + static_cast<int>(rng.uniform_index(std::max<int64_t>(1, (f_bins - lo + 3) / 4)));
    if (lo + w > f_bins) w = f_bins - lo;
    s.bands.emplace_back(lo, lo + w);
    lo += w;
  }
  return s;
}

ComplexSpectrogram random_spec(int channels, int f_bins, int64_t frames, Rng& rng) {
  ComplexSpectrogram spec({2 * (f_bins - 1), (f_bins - 1) / 2 + 1}, channels, f_bins, frames);
  for (auto& v : spec.data) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return spec;
}

int total_width(const BandScheme& s) {
  int w = 0;
  for (int k = 0; k < s.num_bands(); ++k) w += s.width(k);
  return w;
}

}  // namespace

TEST_CASE("default schemes cover all bins with the expected band counts") {
  BandScheme vocals = build_scheme("vocals", 2048, 44100);
  BandScheme bass = build_scheme("bass", 2048, 44100);
  BandScheme drums = build_scheme("drums", 2048, 44100);
  BandScheme other = build_scheme("other", 2048, 44100);

  CHECK(vocals.num_bands() == 41);
  CHECK(bass.num_bands() == 30);
  CHECK(drums.num_bands() == 55);
  CHECK(other.num_bands() == 41);

  for (const BandScheme* s : {&vocals, &bass, &drums, &other}) {
    CHECK(s->n_bins == 1025);
    CHECK(total_width(*s) == 1025);
    CHECK_NOTHROW(s->validate());
  }
  CHECK(other.bands == vocals.bands);
}

TEST_CASE("default schemes scale to a 4096-point transform") {
  BandScheme vocals = build_scheme("vocals", 4096, 44100);
  CHECK(vocals.n_bins == 2049);
  CHECK(total_width(vocals) == 2049);
  CHECK(vocals.num_bands() == 41);
}

TEST_CASE("unknown source is rejected") {
  CHECK_THROWS_AS(build_scheme("piano", 2048, 44100), std::invalid_argument);
}

TEST_CASE("hz ranges expand into runs of equal-width bands") {
  // 0..1000 in 4 bands of 250 Hz, then one band to Nyquist, at 8 kHz / 64 pt.
  BandScheme s = scheme_from_hz_ranges("toy", {{1000, 250}, {4000, 3000}}, 64, 8000);
  CHECK(s.n_bins == 33);
  // 250 Hz = 2 bins at 125 Hz spacing.
  CHECK(s.bands == std::vector<std::pair<int, int>>{{0, 2}, {2, 4}, {4, 6}, {6, 8}, {8, 33}});
}

TEST_CASE("remainder bins join the last band") {
  // Edges at 3000 Hz map to bin 24; the last band runs to bin 33 regardless.
  BandScheme s = scheme_from_hz_ranges("toy", {{1500, 1500}, {3000, 1500}}, 64, 8000);
  CHECK(s.bands == std::vector<std::pair<int, int>>{{0, 12}, {12, 33}});
}

TEST_CASE("bands too narrow for the resolution are rejected") {
  // 10 Hz bands cannot survive a 125 Hz bin grid.
  CHECK_THROWS_AS(scheme_from_hz_ranges("toy", {{100, 10}, {4000, 3900}}, 64, 8000),
                  std::invalid_argument);
}

TEST_CASE("malformed range lists are rejected") {
  CHECK_THROWS_AS(scheme_from_hz_ranges("toy", {}, 64, 8000), std::invalid_argument);
  CHECK_THROWS_AS(scheme_from_hz_ranges("toy", {{4000, 0}}, 64, 8000), std::invalid_argument);
  CHECK_THROWS_AS(scheme_from_hz_ranges("toy", {{4000, 1000}, {2000, 500}}, 64, 8000),
                  std::invalid_argument);
  CHECK_THROWS_AS(scheme_from_hz_ranges("toy", {{9000, 1000}}, 64, 8000), std::invalid_argument);
}

TEST_CASE("validate rejects gaps, overlaps, and empty bands") {
  BandScheme s;
  s.source_name = "bad";
  s.n_bins = 8;
  s.bands = {{0, 4}, {5, 8}};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.bands = {{0, 4}, {3, 8}};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.bands = {{0, 4}, {4, 4}, {4, 8}};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.bands = {{0, 4}, {4, 7}};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.bands = {{0, 4}, {4, 8}};
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("split produces stacked real/imaginary subbands") {
  Rng rng(7);
  ComplexSpectrogram spec = random_spec(2, 8, 5, rng);
  BandScheme s;
  s.source_name = "toy";
  s.n_bins = 8;
  s.bands = {{0, 4}, {4, 8}};

  std::vector<Tensor> parts = split(spec, s);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].shape() == std::vector<int64_t>{2, 8, 5});
  CHECK(parts[1].shape() == std::vector<int64_t>{2, 8, 5});
  CHECK(parts[0].at(1, 2, 3) == spec.at(1, 2, 3).real());
  CHECK(parts[0].at(1, 6, 3) == spec.at(1, 2, 3).imag());
  CHECK(parts[1].at(0, 1, 4) == spec.at(0, 5, 4).real());
  CHECK(parts[1].at(0, 5, 4) == spec.at(0, 5, 4).imag());
}

TEST_CASE("single-band scheme is the identity slice") {
  Rng rng(8);
  ComplexSpectrogram spec = random_spec(1, 9, 4, rng);
  BandScheme s;
  s.source_name = "all";
  s.n_bins = 9;
  s.bands = {{0, 9}};
  std::vector<Tensor> parts = split(spec, s);
  REQUIRE(parts.size() == 1);
  for (int f = 0; f < 9; ++f)
    for (int64_t t = 0; t < 4; ++t) {
      CHECK(parts[0].at(0, f, t) == spec.at(0, f, t).real());
      CHECK(parts[0].at(0, 9 + f, t) == spec.at(0, f, t).imag());
    }
}

TEST_CASE("merge is the exact inverse of split") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int f_bins = 8 + static_cast<int>(rng.uniform_index(120));
    BandScheme s = random_scheme(f_bins, rng);
    ComplexSpectrogram spec = random_spec(1 + static_cast<int>(rng.uniform_index(2)), f_bins,
                                          1 + static_cast<int>(rng.uniform_index(12)), rng);
    ComplexSpectrogram back = merge_mask(split(spec, s), s, spec.fp, spec.sample_rate);
    REQUIRE(back.data.size() == spec.data.size());
    for (size_t i = 0; i < spec.data.size(); ++i) CHECK(back.data[i] == spec.data[i]);
  }
}

TEST_CASE("all-ones subbands merge into an all-ones mask") {
  BandScheme s;
  s.source_name = "toy";
  s.n_bins = 8;
  s.bands = {{0, 3}, {3, 8}};
  std::vector<Tensor> ones;
  ones.emplace_back(std::vector<int64_t>{1, 6, 4}, 1.0);
  ones.emplace_back(std::vector<int64_t>{1, 10, 4}, 1.0);
  ComplexSpectrogram m = merge_mask(ones, s, {14, 7}, 44100);
  for (const auto& v : m.data) CHECK(v == std::complex<double>(1.0, 1.0));
}

TEST_CASE("shape mismatches are rejected") {
  Rng rng(10);
  ComplexSpectrogram spec = random_spec(1, 8, 4, rng);
  BandScheme s;
  s.source_name = "toy";
  s.n_bins = 9;
  s.bands = {{0, 9}};
  CHECK_THROWS_AS(split(spec, s), std::invalid_argument);

  s.n_bins = 8;
  s.bands = {{0, 4}, {4, 8}};
  std::vector<Tensor> parts = split(spec, s);
  parts.pop_back();
  CHECK_THROWS_AS(merge_mask(parts, s, spec.fp, 44100), std::invalid_argument);
  parts = split(spec, s);
  parts[1] = Tensor({1, 6, 4});
  CHECK_THROWS_AS(merge_mask(parts, s, spec.fp, 44100), std::invalid_argument);
}

TEST_CASE("scheme config file round trips through the loader") {
  const char* path = "test_schemes_tmp.json";
  {
    std::ofstream out(path);
    out << R"({"vocals": [[1000, 100], [22050, 21050]], "bass": [[22050, 22050]]})";
  }
  auto loaded = load_scheme_config(path);
  REQUIRE(loaded.count("vocals") == 1);
  REQUIRE(loaded.count("bass") == 1);
  CHECK(loaded["vocals"].size() == 2);
  CHECK(loaded["vocals"][0].upper_edge_hz == 1000.0);
  CHECK(loaded["vocals"][0].band_width_hz == 100.0);
  BandScheme s = scheme_from_hz_ranges("bass", loaded["bass"], 2048, 44100);
  CHECK(s.num_bands() == 1);
  CHECK(s.bands[0] == std::pair<int, int>{0, 1025});
  std::remove(path);
}

TEST_CASE("shipped scheme file matches the built-in table") {
  auto loaded = load_scheme_config(std::string(BSRNN_SOURCE_DIR) + "/data/default_schemes.json");
  for (const char* source : {"vocals", "bass", "drums", "other"}) {
    REQUIRE(loaded.count(source) == 1);
    const auto& builtin = default_hz_ranges(source);
    REQUIRE(loaded[source].size() == builtin.size());
    for (size_t i = 0; i < builtin.size(); ++i) {
      CHECK(loaded[source][i].upper_edge_hz == builtin[i].upper_edge_hz);
      CHECK(loaded[source][i].band_width_hz == builtin[i].band_width_hz);
    }
  }
}
