// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_DATAGEN_HPP_
#define BSRNN_DATAGEN_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bsrnn/waveform.hpp"

namespace bsrnn {

inline constexpr std::array<const char*, 4> kStemNames = {"vocals", "bass", "drums", "other"};

int stem_index(const std::string& stem);

// Windowed-RMS source activity detector. A window is active when its RMS sits
// within rel_threshold_db of the track's 90th-percentile window RMS and above
// an absolute floor; active windows merge, short survivors are discarded.
struct SadParams {
  double window_s = 1.0;
  double hop_s = 0.5;
  double rel_threshold_db = 40.0;
  double abs_floor_dbfs = -60.0;
  double min_segment_s = 3.0;

  void validate() const;
  uint64_t hash() const;  // cache key; covers every field
};

// Half-open sample interval [start, end).
struct Segment {
  int64_t start = 0;
  int64_t end = 0;
  int64_t length() const { return end - start; }
  bool operator==(const Segment& o) const { return start == o.start && end == o.end; }
};

std::vector<Segment> detect_active_segments(const Waveform& w, const SadParams& params);

// Random-access audio source. Implementations must be safe for concurrent
// reads; the generator never writes.
class TrackStore {
 public:
  virtual ~TrackStore() = default;
  virtual int num_songs() const = 0;
  virtual std::string song_id(int song) const = 0;
  virtual int64_t song_length(int song) const = 0;
  virtual int sample_rate() const = 0;
  virtual Waveform read_stem(int song, const std::string& stem, int64_t start,
                             int64_t count) const = 0;
};

class MemoryTrackStore : public TrackStore {
 public:
  void add_song(const std::string& id, std::map<std::string, Waveform> stems);

  int num_songs() const override;
  std::string song_id(int song) const override;
  int64_t song_length(int song) const override;
  int sample_rate() const override;
  Waveform read_stem(int song, const std::string& stem, int64_t start,
                     int64_t count) const override;

 private:
  struct Song {
    std::string id;
    std::map<std::string, Waveform> stems;
  };
  std::vector<Song> songs_;
};

// Songs are the sorted subdirectories of `root`, stems the WAV files inside
// (`<root>/<song>/<stem>.wav`). Headers are validated up front; sample data
// is read on demand.
class DirectoryTrackStore : public TrackStore {
 public:
  explicit DirectoryTrackStore(const std::string& root);
  DirectoryTrackStore(const std::string& root, std::vector<std::string> songs);

  int num_songs() const override;
  std::string song_id(int song) const override;
  int64_t song_length(int song) const override;
  int sample_rate() const override;
  Waveform read_stem(int song, const std::string& stem, int64_t start,
                     int64_t count) const override;

 private:
  std::string stem_path(int song, const std::string& stem) const;

  std::string root_;
  std::vector<std::string> songs_;
  std::vector<int64_t> lengths_;
  int sample_rate_ = 0;
};

// Per-(song, stem) active segments plus the parameter hash they were built
// under, so stale caches are detected.
struct ActivityIndex {
  uint64_t sad_hash = 0;
  std::map<std::string, std::map<std::string, std::vector<Segment>>> segments;

  const std::vector<Segment>& for_stem(const std::string& song, const std::string& stem) const;
  std::string to_json() const;
  static ActivityIndex from_json(const std::string& text);
};

ActivityIndex build_activity_index(const TrackStore& store, const SadParams& params);

// Reuses `cache_path` when its hash matches; otherwise rebuilds and rewrites
// the cache atomically.
ActivityIndex load_or_build_activity_index(const std::string& cache_path,
                                           const TrackStore& store, const SadParams& params);

enum class DropMode { kEachChunk, kTargetOnly };
DropMode drop_mode_from_string(const std::string& s);
std::string to_string(DropMode m);

struct DatagenConfig {
  double chunk_s = 3.0;
  double gain_low_db = -10.0;
  double gain_high_db = 10.0;
  double drop_prob = 0.1;
  DropMode drop_mode = DropMode::kEachChunk;
  bool use_sad = true;
  bool umx_augment = false;
  SadParams sad;
  int64_t epoch_size = 20000;
  std::string target = "vocals";
  int max_retries = 64;

  void validate() const;
};

struct ChunkMeta {
  int song = -1;
  std::string song_id;
  int64_t offset = 0;
  double gain_db = 0.0;
  bool dropped = false;
  bool swapped = false;
  double linear_gain = 1.0;
};

struct TrainingExample {
  Waveform mixture;
  Waveform target;
  std::array<Waveform, 4> stems;  // post-gain/augment; silent when dropped
  std::array<ChunkMeta, 4> meta;  // indexed like kStemNames
  uint64_t seed = 0;
  int64_t epoch = 0;
  int64_t index = 0;
};

// Amplitude scale 10^(u/20), so u is exactly the energy change in dB.
Waveform apply_gain_db(const Waveform& chunk, double u);

// Pure function of (seed, epoch, sample_index): chunks from distinct songs
// when at least four exist, random offsets inside active segments, mixing
// gains, per-chunk drops, and optional channel-swap/linear-gain augmentation.
// The mixture is the exact sum of the retained stems.
TrainingExample sample_training_example(const TrackStore& store, const ActivityIndex& index,
                                        const DatagenConfig& cfg, uint64_t seed, int64_t epoch,
                                        int64_t sample_index);

// Random-access view over one epoch of generated examples.
class EpochStream {
 public:
  EpochStream(const TrackStore& store, const ActivityIndex& index, DatagenConfig cfg,
              uint64_t seed, int64_t epoch);

  int64_t size() const { return cfg_.epoch_size; }
  TrainingExample at(int64_t i) const;

 private:
  const TrackStore& store_;
  const ActivityIndex& index_;
  DatagenConfig cfg_;
  uint64_t seed_;
  int64_t epoch_;
};

// The fixed 14-song validation split of the 100-song training partition.
const std::vector<std::string>& canonical_validation_songs();

// Partitions the song directories under `root` into training and validation
// stores; `valid_names` defaults to the canonical list.
std::pair<DirectoryTrackStore, DirectoryTrackStore> split_train_directory(
    const std::string& root, const std::vector<std::string>& valid_names = {});

}  // namespace bsrnn

#endif  // BSRNN_DATAGEN_HPP_
