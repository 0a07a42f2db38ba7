// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include "bsrnn/rng.hpp"
#include "bsrnn/wavio.hpp"
#include "json.hpp"

namespace bsrnn {

using nlohmann::json;

int stem_index(const std::string& stem) {
  for (size_t i = 0; i < kStemNames.size(); ++i)
    if (stem == kStemNames[i]) return static_cast<int>(i);
  throw std::invalid_argument("unknown stem: " + stem);
}

void SadParams::validate() const {
  if (window_s <= 0.0 || hop_s <= 0.0 || hop_s > window_s)
    throw std::invalid_argument("sad needs 0 < hop <= window");
  if (rel_threshold_db <= 0.0) throw std::invalid_argument("sad threshold must be positive");
  if (min_segment_s < 0.0) throw std::invalid_argument("sad min segment must be non-negative");
}

uint64_t SadParams::hash() const {
  const double fields[5] = {window_s, hop_s, rel_threshold_db, abs_floor_dbfs, min_segment_s};
  unsigned char bytes[sizeof(fields)];
  std::memcpy(bytes, fields, sizeof(fields));
  uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<Segment> detect_active_segments(const Waveform& w, const SadParams& params) {
  params.validate();
  const int64_t L = w.length;
  if (L == 0) return {};
  const int64_t win = std::max<int64_t>(1, std::llround(params.window_s * w.sample_rate));
  const int64_t hop = std::max<int64_t>(1, std::llround(params.hop_s * w.sample_rate));

  std::vector<int64_t> starts;
  for (int64_t p = 0; p + win <= L; p += hop) starts.push_back(p);
  if (starts.empty()) starts.push_back(0);  // track shorter than one window

  std::vector<double> rms(starts.size());
  for (size_t i = 0; i < starts.size(); ++i) {
    const int64_t lo = starts[i];
    const int64_t hi = std::min(lo + win, L);
    double sq = 0.0;
    for (int c = 0; c < w.channels; ++c)
      for (int64_t n = lo; n < hi; ++n) sq += w.at(c, n) * w.at(c, n);
    rms[i] = std::sqrt(sq / (static_cast<double>(w.channels) * static_cast<double>(hi - lo)));
  }

  std::vector<double> sorted = rms;
  std::sort(sorted.begin(), sorted.end());
  const size_t rank =
      static_cast<size_t>(std::ceil(0.9 * static_cast<double>(sorted.size()))) - 1;
  const double pct90 = sorted[rank];
  const double rel_floor_db =
      pct90 > 0.0 ? 20.0 * std::log10(pct90) - params.rel_threshold_db
                  : -std::numeric_limits<double>::infinity();

  std::vector<Segment> merged;
  for (size_t i = 0; i < starts.size(); ++i) {
    if (rms[i] <= 0.0) continue;
    const double db = 20.0 * std::log10(rms[i]);
    if (db <= rel_floor_db || db <= params.abs_floor_dbfs) continue;
    const Segment seg{starts[i], std::min(starts[i] + win, L)};
    if (!merged.empty() && seg.start <= merged.back().end)
      merged.back().end = std::max(merged.back().end, seg.end);
    else
      merged.push_back(seg);
  }

  const int64_t min_len = std::llround(params.min_segment_s * w.sample_rate);
  std::vector<Segment> out;
  for (const Segment& s : merged)
    if (s.length() >= min_len) out.push_back(s);
  return out;
}

void MemoryTrackStore::add_song(const std::string& id, std::map<std::string, Waveform> stems) {
  if (stems.empty()) throw std::invalid_argument("song needs at least one stem");
  int64_t len = -1;
  int rate = -1;
  for (const auto& [name, w] : stems) {
    if (len < 0) {
      len = w.length;
      rate = w.sample_rate;
    } else if (w.length != len || w.sample_rate != rate) {
      throw std::invalid_argument("stems of one song must share length and rate");
    }
  }
  if (!songs_.empty() && rate != sample_rate())
    throw std::invalid_argument("all songs must share one sample rate");
  songs_.push_back({id, std::move(stems)});
}

int MemoryTrackStore::num_songs() const { return static_cast<int>(songs_.size()); }

std::string MemoryTrackStore::song_id(int song) const { return songs_.at(song).id; }

int64_t MemoryTrackStore::song_length(int song) const {
  return songs_.at(song).stems.begin()->second.length;
}

int MemoryTrackStore::sample_rate() const {
  if (songs_.empty()) throw std::logic_error("empty track store");
  return songs_.front().stems.begin()->second.sample_rate;
}

Waveform MemoryTrackStore::read_stem(int song, const std::string& stem, int64_t start,
                                     int64_t count) const {
  const auto& stems = songs_.at(song).stems;
  const auto it = stems.find(stem);
  if (it == stems.end())
    throw std::invalid_argument("song " + songs_.at(song).id + " has no stem " + stem);
  const Waveform& w = it->second;
  if (start < 0 || count < 0 || start + count > w.length)
    throw std::out_of_range("chunk outside the stem");
  Waveform out(w.channels, count, w.sample_rate);
  for (int c = 0; c < w.channels; ++c)
    for (int64_t i = 0; i < count; ++i) out.at(c, i) = w.at(c, start + i);
  return out;
}

namespace {

std::vector<std::string> sorted_song_dirs(const std::string& root) {
  std::vector<std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(root))
    if (entry.is_directory()) out.push_back(entry.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

DirectoryTrackStore::DirectoryTrackStore(const std::string& root)
    : DirectoryTrackStore(root, sorted_song_dirs(root)) {}

DirectoryTrackStore::DirectoryTrackStore(const std::string& root, std::vector<std::string> songs)
    : root_(root), songs_(std::move(songs)) {
  lengths_.reserve(songs_.size());
  for (size_t s = 0; s < songs_.size(); ++s) {
    int64_t len = -1;
    for (const char* stem : kStemNames) {
      const WavInfo info = probe_wav(stem_path(static_cast<int>(s), stem));
      if (len < 0) len = info.frames;
      if (info.frames != len)
        throw std::runtime_error(songs_[s] + ": stems disagree on length");
      if (sample_rate_ == 0) sample_rate_ = info.sample_rate;
      if (info.sample_rate != sample_rate_)
        throw std::runtime_error(songs_[s] + ": sample-rate mismatch across the store");
    }
    lengths_.push_back(len);
  }
}

int DirectoryTrackStore::num_songs() const { return static_cast<int>(songs_.size()); }

std::string DirectoryTrackStore::song_id(int song) const { return songs_.at(song); }

int64_t DirectoryTrackStore::song_length(int song) const { return lengths_.at(song); }

int DirectoryTrackStore::sample_rate() const {
  if (songs_.empty()) throw std::logic_error("empty track store");
  return sample_rate_;
}

std::string DirectoryTrackStore::stem_path(int song, const std::string& stem) const {
  return (std::filesystem::path(root_) / songs_.at(song) / (stem + ".wav")).string();
}

Waveform DirectoryTrackStore::read_stem(int song, const std::string& stem, int64_t start,
                                        int64_t count) const {
  return read_wav_range(stem_path(song, stem), start, count);
}

const std::vector<Segment>& ActivityIndex::for_stem(const std::string& song,
                                                    const std::string& stem) const {
  const auto s = segments.find(song);
  if (s == segments.end()) throw std::out_of_range("no activity entry for song " + song);
  const auto t = s->second.find(stem);
  if (t == s->second.end())
    throw std::out_of_range("no activity entry for " + song + "/" + stem);
  return t->second;
}

std::string ActivityIndex::to_json() const {
  json j;
  j["sad_hash"] = sad_hash;
  json songs = json::object();
  for (const auto& [song, stems] : segments) {
    json per_stem = json::object();
    for (const auto& [stem, segs] : stems) {
      json arr = json::array();
      for (const Segment& s : segs) arr.push_back({s.start, s.end});
      per_stem[stem] = std::move(arr);
    }
    songs[song] = std::move(per_stem);
  }
  j["songs"] = std::move(songs);
  return j.dump();
}

ActivityIndex ActivityIndex::from_json(const std::string& text) {
  const json j = json::parse(text);
  ActivityIndex idx;
  idx.sad_hash = j.at("sad_hash").get<uint64_t>();
  for (const auto& [song, stems] : j.at("songs").items())
    for (const auto& [stem, arr] : stems.items()) {
      std::vector<Segment> segs;
      for (const auto& pair : arr)
        segs.push_back({pair.at(0).get<int64_t>(), pair.at(1).get<int64_t>()});
      idx.segments[song][stem] = std::move(segs);
    }
  return idx;
}

ActivityIndex build_activity_index(const TrackStore& store, const SadParams& params) {
  ActivityIndex idx;
  idx.sad_hash = params.hash();
  for (int s = 0; s < store.num_songs(); ++s) {
    const std::string id = store.song_id(s);
    for (const char* stem : kStemNames) {
      const Waveform w = store.read_stem(s, stem, 0, store.song_length(s));
      idx.segments[id][stem] = detect_active_segments(w, params);
    }
  }
  return idx;
}

ActivityIndex load_or_build_activity_index(const std::string& cache_path,
                                           const TrackStore& store, const SadParams& params) {
  if (std::filesystem::exists(cache_path)) {
    std::ifstream in(cache_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
      ActivityIndex idx = ActivityIndex::from_json(text);
      if (idx.sad_hash == params.hash()) return idx;
    } catch (const std::exception&) {
      // Malformed cache: fall through to a rebuild.
    }
  }
  ActivityIndex idx = build_activity_index(store, params);
  const std::string tmp = cache_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << idx.to_json();
    if (!out) throw std::runtime_error("cannot write activity cache " + tmp);
  }
  std::filesystem::rename(tmp, cache_path);
  return idx;
}

DropMode drop_mode_from_string(const std::string& s) {
  if (s == "each-chunk") return DropMode::kEachChunk;
  if (s == "target-only") return DropMode::kTargetOnly;
  throw std::invalid_argument("unknown drop mode: " + s);
}

std::string to_string(DropMode m) {
  return m == DropMode::kEachChunk ? "each-chunk" : "target-only";
}

void DatagenConfig::validate() const {
  if (chunk_s <= 0.0) throw std::invalid_argument("chunk length must be positive");
  if (gain_low_db > gain_high_db) throw std::invalid_argument("gain range is inverted");
  if (drop_prob < 0.0 || drop_prob > 1.0) throw std::invalid_argument("drop_prob outside [0,1]");
  if (epoch_size < 1) throw std::invalid_argument("epoch size must be positive");
  if (max_retries < 1) throw std::invalid_argument("max_retries must be positive");
  stem_index(target);  // throws on unknown names
  sad.validate();
}

Waveform apply_gain_db(const Waveform& chunk, double u) {
  Waveform out = chunk;
  const double amp = std::pow(10.0, u / 20.0);
  for (auto& v : out.samples) v *= amp;
  return out;
}

namespace {

// Segments of one stem that can host a full chunk.
std::vector<Segment> eligible_segments(const TrackStore& store, const ActivityIndex& index,
                                       const DatagenConfig& cfg, int song,
                                       const std::string& stem, int64_t chunk_len) {
  std::vector<Segment> all;
  if (cfg.use_sad)
    all = index.for_stem(store.song_id(song), stem);
  else
    all = {{0, store.song_length(song)}};
  std::vector<Segment> ok;
  for (const Segment& s : all)
    if (s.length() >= chunk_len) ok.push_back(s);
  return ok;
}

}  // namespace

TrainingExample sample_training_example(const TrackStore& store, const ActivityIndex& index,
                                        const DatagenConfig& cfg, uint64_t seed, int64_t epoch,
                                        int64_t sample_index) {
  cfg.validate();
  const int n_songs = store.num_songs();
  if (n_songs < 1) throw std::invalid_argument("empty track store");
  const int64_t chunk_len = std::llround(cfg.chunk_s * store.sample_rate());
  const bool distinct = n_songs >= 4;
  const int target_idx = stem_index(cfg.target);

  Rng rng(mix_seed(seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(sample_index)));
  TrainingExample ex;
  ex.seed = seed;
  ex.epoch = epoch;
  ex.index = sample_index;

  std::set<int> used;
  for (int k = 0; k < 4; ++k) {
    const std::string stem = kStemNames[static_cast<size_t>(k)];

    int song = -1;
    std::vector<Segment> segs;
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
      const int candidate = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n_songs)));
      if (distinct && used.count(candidate)) continue;
      segs = eligible_segments(store, index, cfg, candidate, stem, chunk_len);
      if (segs.empty()) continue;
      song = candidate;
      break;
    }
    if (song < 0)
      throw std::runtime_error("no usable " + stem + " segment after " +
                               std::to_string(cfg.max_retries) + " song draws");
    used.insert(song);

    const Segment seg = segs[rng.uniform_index(segs.size())];
    const int64_t offset =
        seg.start + static_cast<int64_t>(
                        rng.uniform_index(static_cast<uint64_t>(seg.length() - chunk_len + 1)));
    const double u = rng.uniform(cfg.gain_low_db, cfg.gain_high_db);
    const bool droppable = cfg.drop_mode == DropMode::kEachChunk || k == target_idx;
    const bool dropped = droppable && rng.bernoulli(cfg.drop_prob);

    ChunkMeta& meta = ex.meta[static_cast<size_t>(k)];
    meta.song = song;
    meta.song_id = store.song_id(song);
    meta.offset = offset;
    meta.gain_db = u;
    meta.dropped = dropped;

    Waveform chunk = apply_gain_db(store.read_stem(song, stem, offset, chunk_len), u);
    if (dropped)
      ex.stems[static_cast<size_t>(k)] = Waveform(chunk.channels, chunk_len, chunk.sample_rate);
    else
      ex.stems[static_cast<size_t>(k)] = std::move(chunk);
  }

  if (cfg.umx_augment) {
    for (int k = 0; k < 4; ++k) {
      const bool swap = rng.bernoulli(0.5);
      const double lin = rng.uniform(0.25, 1.25);
      ChunkMeta& meta = ex.meta[static_cast<size_t>(k)];
      meta.swapped = swap;
      meta.linear_gain = lin;
      Waveform& w = ex.stems[static_cast<size_t>(k)];
      if (swap && w.channels == 2)
        for (int64_t i = 0; i < w.length; ++i) std::swap(w.at(0, i), w.at(1, i));
      for (auto& v : w.samples) v *= lin;
    }
  }

  const Waveform& first = ex.stems[0];
  ex.mixture = Waveform(first.channels, first.length, first.sample_rate);
  for (int k = 0; k < 4; ++k) {
    const Waveform& w = ex.stems[static_cast<size_t>(k)];
    if (w.channels != first.channels)
      throw std::runtime_error("stems disagree on channel count");
    for (size_t i = 0; i < w.samples.size(); ++i) ex.mixture.samples[i] += w.samples[i];
  }
  ex.target = ex.stems[static_cast<size_t>(target_idx)];
  return ex;
}

EpochStream::EpochStream(const TrackStore& store, const ActivityIndex& index, DatagenConfig cfg,
                         uint64_t seed, int64_t epoch)
    : store_(store), index_(index), cfg_(std::move(cfg)), seed_(seed), epoch_(epoch) {
  cfg_.validate();
}

TrainingExample EpochStream::at(int64_t i) const {
  if (i < 0 || i >= cfg_.epoch_size) throw std::out_of_range("epoch index out of range");
  return sample_training_example(store_, index_, cfg_, seed_, epoch_, i);
}

const std::vector<std::string>& canonical_validation_songs() {
  static const std::vector<std::string> songs = {
      "ANiMAL - Rockshow",
      "Actions - One Minute Smile",
      "Alexander Ross - Goodbye Bolero",
      "BKS - Bulldozer",
      "Celestial Shore - Die For Us",
      "Fergessen - Nos Palpitants",
      "Hezekiah Jones - Borrowed Heart",
      "James May - On The Line",
      "Johnny Lokke - Promises & Lies",
      "Leaf - Summerghost",
      "Meaxic - Take A Step",
      "Patrick Talbot - A Reason To Leave",
      "Skelpolu - Human Mistakes",
      "Triviul - Angelsaint",
  };
  return songs;
}

std::pair<DirectoryTrackStore, DirectoryTrackStore> split_train_directory(
    const std::string& root, const std::vector<std::string>& valid_names) {
  const std::vector<std::string>& wanted =
      valid_names.empty() ? canonical_validation_songs() : valid_names;
  const std::set<std::string> valid_set(wanted.begin(), wanted.end());

  std::vector<std::string> train, valid;
  for (const std::string& song : sorted_song_dirs(root)) {
    if (valid_set.count(song))
      valid.push_back(song);
    else
      train.push_back(song);
  }
  if (valid.empty()) throw std::runtime_error("no validation songs found under " + root);
  return {DirectoryTrackStore(root, std::move(train)),
          DirectoryTrackStore(root, std::move(valid))};
}

}  // namespace bsrnn
