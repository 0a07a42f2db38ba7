// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "bsrnn/bandscheme.hpp"
#include "bsrnn/checkpoint.hpp"
#include "bsrnn/config.hpp"
#include "bsrnn/datagen.hpp"
#include "bsrnn/energymeter.hpp"
#include "bsrnn/inference.hpp"
#include "bsrnn/metrics.hpp"
#include "bsrnn/rng.hpp"
#include "bsrnn/trainer.hpp"
#include "bsrnn/wavio.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace bsrnn;

namespace {

// Faults the caller could have avoided (bad flags, bad files) exit with 1;
// everything else that throws exits with 2.
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw UserError(std::string("cannot open ") + what + ": " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

PipelineConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
  try {
    return PipelineConfig::load(path, sets);
  } catch (const std::exception& e) {
    throw UserError(e.what());
  }
}

BandScheme resolve_scheme(const PipelineConfig& cfg, const std::string& source, int sample_rate) {
  const int n_fft = cfg.model.frame_params.window_size;
  if (!cfg.scheme_file.empty()) {
    auto all = load_scheme_config(cfg.scheme_file);
    auto it = all.find(source);
    if (it == all.end())
      throw UserError("scheme file " + cfg.scheme_file + " has no entry for " + source);
    return scheme_from_hz_ranges(source, it->second, n_fft, sample_rate);
  }
  return build_scheme(source, n_fft, sample_rate);
}

std::map<std::string, std::string> parse_checkpoint_args(const std::vector<std::string>& pairs) {
  std::map<std::string, std::string> out;
  for (const std::string& p : pairs) {
    size_t eq = p.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == p.size())
      throw UserError("expected source=path, got '" + p + "'");
    std::string source = p.substr(0, eq);
    try {
      stem_index(source);
    } catch (const std::exception&) {
      throw UserError("unknown source '" + source + "' in " + p);
    }
    if (out.count(source)) throw UserError("source given twice: " + source);
    std::string path = p.substr(eq + 1);
    if (!fs::exists(path)) throw UserError("missing checkpoint: " + path);
    out.emplace(std::move(source), std::move(path));
  }
  if (out.empty()) throw UserError("at least one --checkpoint source=path is required");
  return out;
}

// ---------------------------------------------------------------- train ---

struct TrainArgs {
  std::string config_path;
  std::string source;
  std::vector<std::string> sets;
  int patience = 0;
  std::string run_dir;
  std::string valid_list;
  std::string hardware_file;
};

int cmd_train(TrainArgs args) {
  if (args.patience > 0) args.sets.push_back("train.patience=" + std::to_string(args.patience));
  if (!args.source.empty()) args.sets.push_back("datagen.target=" + args.source);
  PipelineConfig cfg = load_config(args.config_path, args.sets);
  const std::string source = cfg.datagen.target;

  std::string root;
  try {
    root = cfg.resolved_dataset_root();
  } catch (const std::exception& e) {
    throw UserError(e.what());
  }
  const fs::path train_root = fs::path(root) / "train";
  if (!fs::is_directory(train_root)) throw UserError("no train directory under " + root);

  std::vector<std::string> valid_names;
  if (!args.valid_list.empty()) {
    try {
      valid_names = read_song_list(args.valid_list);
    } catch (const std::exception& e) {
      throw UserError(e.what());
    }
  }

  auto stores = [&] {
    try {
      return split_train_directory(train_root.string(), valid_names);
    } catch (const std::exception& e) {
      throw UserError(std::string("cannot split dataset: ") + e.what());
    }
  }();
  DirectoryTrackStore& train_store = stores.first;
  DirectoryTrackStore& valid_store = stores.second;
  std::cout << "dataset: " << train_store.num_songs() << " training / "
            << valid_store.num_songs() << " validation songs at "
            << train_store.sample_rate() << " Hz\n";

  cfg.model.scheme = resolve_scheme(cfg, source, train_store.sample_rate());
  cfg.model.validate();

  fs::create_directories(cfg.output_dir);
  ActivityIndex index;
  if (cfg.datagen.use_sad) {
    const std::string cache = (fs::path(cfg.output_dir) / "activity-train.json").string();
    index = load_or_build_activity_index(cache, train_store, cfg.datagen.sad);
    std::cout << "activity index ready (" << cache << ")\n";
  }

  TrainOptions options;
  options.run_dir =
      args.run_dir.empty() ? (fs::path(cfg.output_dir) / source).string() : args.run_dir;
  options.inference = cfg.inference;
  options.config_snapshot = cfg.to_json();
  options.model_label = "N" + std::to_string(cfg.model.latent_dim) + "-R" +
                        std::to_string(cfg.model.depth) + "-" + to_string(cfg.model.block_kind);
  if (!args.hardware_file.empty())
    options.hardware = HardwareSpec::from_json(slurp(args.hardware_file, "hardware spec"));

  TrainResult result = train(cfg.model, cfg.train, cfg.datagen, train_store, index, valid_store,
                             options);
  std::cout << "status: " << result.status << "\n"
            << "epochs: " << result.epochs_completed << "\n"
            << "best " << to_string(cfg.train.monitor) << ": " << result.report.best_metric_db
            << "\n"
            << "best checkpoint: " << result.best_checkpoint << "\n"
            << "report: " << (fs::path(options.run_dir) / "report.json").string() << "\n";
  return result.status == "aborted-non-finite" ? 2 : 0;
}

// ------------------------------------------------------------- separate ---

struct SeparateArgs {
  std::vector<std::string> checkpoints;
  std::string input;
  std::string out_dir = ".";
  std::string method;
  double segment = 0.0;
  double hop = 0.0;
  double overlap = -1.0;
};

int cmd_separate(const SeparateArgs& args) {
  auto ckpts = parse_checkpoint_args(args.checkpoints);
  if (!fs::exists(args.input)) throw UserError("missing input audio: " + args.input);

  InferenceConfig cfg;
  if (!args.method.empty()) {
    try {
      cfg.method = inference_method_from_string(args.method);
    } catch (const std::exception& e) {
      throw UserError(e.what());
    }
  }
  if (args.segment > 0.0) {
    cfg.ola_segment_s = args.segment;
    cfg.fader_segment_s = args.segment;
  }
  if (args.hop > 0.0) cfg.ola_hop_s = args.hop;
  if (args.overlap >= 0.0) cfg.fader_overlap = args.overlap;
  cfg.validate();

  Waveform song = read_wav(args.input);
  fs::create_directories(args.out_dir);
  for (const auto& [source, path] : ckpts) {
    SeparationModel model = load_checkpoint(path);
    ModelSegmentProcessor proc(model);
    Waveform est = separate(song, proc, cfg);
    const std::string out = (fs::path(args.out_dir) / (source + ".wav")).string();
    write_wav(out, est);
    std::cout << source << " -> " << out << " (" << est.length << " samples)\n";
  }
  return 0;
}

// ------------------------------------------------------------- evaluate ---

struct EvaluateArgs {
  std::string dataset;
  std::string split = "test";
  std::string estimates_dir;
  std::vector<std::string> checkpoints;
  std::string out_json;
  std::string method;
};

Waveform sum_stems(const TrackStore& store, int song) {
  Waveform mix;
  for (size_t k = 0; k < kStemNames.size(); ++k) {
    Waveform stem = store.read_stem(song, kStemNames[k], 0, store.song_length(song));
    if (k == 0) {
      mix = std::move(stem);
    } else {
      for (size_t i = 0; i < mix.samples.size(); ++i) mix.samples[i] += stem.samples[i];
    }
  }
  return mix;
}

int cmd_evaluate(const EvaluateArgs& args) {
  std::string root = args.dataset;
  if (root.empty()) {
    const char* env = std::getenv("BSRNN_DATASET_ROOT");
    if (env == nullptr || *env == '\0')
      throw UserError("pass --dataset or export BSRNN_DATASET_ROOT");
    root = env;
  }
  const fs::path split_dir = fs::path(root) / args.split;
  if (!fs::is_directory(split_dir)) throw UserError("no such split: " + split_dir.string());
  auto store = [&] {
    try {
      return DirectoryTrackStore(split_dir.string());
    } catch (const std::exception& e) {
      throw UserError(std::string("cannot read split: ") + e.what());
    }
  }();

  const bool from_files = !args.estimates_dir.empty();
  if (!from_files && args.checkpoints.empty())
    throw UserError("pass --estimates or at least one --checkpoint source=path");

  std::map<std::string, std::string> ckpts;
  InferenceConfig icfg;
  if (!from_files) {
    ckpts = parse_checkpoint_args(args.checkpoints);
    if (!args.method.empty()) icfg.method = inference_method_from_string(args.method);
  }

  EvaluationReport report;
  for (int s = 0; s < store.num_songs(); ++s) {
    const std::string song = store.song_id(s);
    std::map<std::string, Waveform> estimates;
    if (from_files) {
      for (const char* source : kStemNames) {
        const fs::path p = fs::path(args.estimates_dir) / song / (std::string(source) + ".wav");
        if (fs::exists(p)) estimates.emplace(source, read_wav(p.string()));
      }
    } else {
      Waveform mixture = sum_stems(store, s);
      for (const auto& [source, path] : ckpts) {
        SeparationModel model = load_checkpoint(path);
        ModelSegmentProcessor proc(model);
        estimates.emplace(source, separate(mixture, proc, icfg));
      }
    }
    for (const auto& [source, est] : estimates) {
      Waveform ref = store.read_stem(s, source, 0, store.song_length(s));
      if (est.length != ref.length || est.channels != ref.channels)
        throw UserError("estimate shape mismatch for " + song + "/" + source);
      auto u = sdr(ref, est);
      auto c = csdr_song(ref, est);
      if (!u || !c) {
        std::cerr << "skipping " << song << "/" << source << ": silent reference\n";
        continue;
      }
      report.rows.push_back({song, source, *u, *c});
    }
  }
  if (report.rows.empty()) throw UserError("nothing to evaluate: no estimates matched the split");

  std::cout << report.to_table();
  if (!args.out_json.empty()) {
    std::ofstream out(args.out_json, std::ios::trunc);
    out << report.to_json() << "\n";
    std::cout << "wrote " << args.out_json << "\n";
  }
  return 0;
}

// --------------------------------------------------------------- report ---

struct ReportArgs {
  std::vector<std::string> run_dirs;
  std::string out_json;
};

int cmd_report(const ReportArgs& args) {
  std::vector<RunReport> reports;
  for (const std::string& dir : args.run_dirs) {
    const fs::path p = fs::path(dir) / "report.json";
    if (!fs::exists(p)) {
      std::cerr << "no report.json under " << dir << ", skipping\n";
      continue;
    }
    reports.push_back(RunReport::from_json(slurp(p.string(), "run report")));
  }
  if (reports.empty()) throw UserError("no run reports found");

  std::cout << "run            source   label                 epochs   best(dB)   wall(h)   "
               "energy(kWh)\n";
  std::vector<ParetoPoint> points;
  for (const RunReport& r : reports) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-14s %-8s %-20s %7d %10.3f %9.3f %13.4f\n",
                  r.run_id.c_str(), r.source.c_str(), r.model_label.c_str(), r.epochs,
                  r.best_metric_db, r.wall_time_h, r.energy_kwh);
    std::cout << line;
    points.push_back({r.best_metric_db, r.energy_kwh, r.run_id});
  }
  auto front = pareto_front(points);
  std::cout << "pareto front (quality vs energy):";
  for (const auto& p : front) std::cout << " " << p.label;
  std::cout << "\n";

  if (!args.out_json.empty()) {
    nlohmann::json j;
    j["reports"] = nlohmann::json::array();
    for (const RunReport& r : reports) j["reports"].push_back(nlohmann::json::parse(r.to_json()));
    j["pareto_front"] = nlohmann::json::array();
    for (const auto& p : front) j["pareto_front"].push_back(p.label);
    std::ofstream out(args.out_json, std::ios::trunc);
    out << j.dump(2) << "\n";
    std::cout << "wrote " << args.out_json << "\n";
  }
  return 0;
}

// --------------------------------------------------------- make-fixture ---

struct FixtureArgs {
  std::string out_dir;
  int train_songs = 3;
  int test_songs = 2;
  double seconds = 12.0;
  int rate = 4000;
  uint64_t seed = 1;
};

Waveform fixture_stem(int song, int stem, const FixtureArgs& args) {
  const auto len = static_cast<int64_t>(std::llround(args.seconds * args.rate));
  Waveform w(2, len, args.rate);
  Rng rng(mix_seed(args.seed, static_cast<uint64_t>(song), static_cast<uint64_t>(stem)));
  // One tone per stem in its own register plus broadband noise, loud enough
  // everywhere that activity detection keeps whole tracks.
  const double hz = 60.0 * std::pow(2.0, stem) * (1.0 + 0.21 * song);
  const double phase = rng.uniform(0.0, 6.28);
  for (int c = 0; c < 2; ++c)
    for (int64_t i = 0; i < len; ++i)
      w.at(c, i) = 0.2 * std::sin(2.0 * 3.14159265358979323846 * hz * i / args.rate + phase + c) +
                   0.05 * rng.uniform(-1.0, 1.0);
  return w;
}

int cmd_make_fixture(const FixtureArgs& args) {
  if (args.out_dir.empty()) throw UserError("--out is required");
  if (args.train_songs < 2 || args.test_songs < 1)
    throw UserError("need at least two training songs and one test song");

  auto write_song = [&](const fs::path& dir, int song, bool with_mixture) {
    fs::create_directories(dir);
    Waveform mix;
    for (size_t k = 0; k < kStemNames.size(); ++k) {
      Waveform stem = fixture_stem(song, static_cast<int>(k), args);
      write_wav((dir / (std::string(kStemNames[k]) + ".wav")).string(), stem);
      if (k == 0) {
        mix = std::move(stem);
      } else {
        for (size_t i = 0; i < mix.samples.size(); ++i) mix.samples[i] += stem.samples[i];
      }
    }
    if (with_mixture) write_wav((dir / "mixture.wav").string(), mix);
  };

  const fs::path root(args.out_dir);
  char name[32];
  for (int s = 0; s < args.train_songs; ++s) {
    std::snprintf(name, sizeof(name), "fix%03d", s);
    write_song(root / "train" / name, s, false);
  }
  for (int s = 0; s < args.test_songs; ++s) {
    std::snprintf(name, sizeof(name), "tst%03d", s);
    write_song(root / "test" / name, 100 + s, true);
  }

  // Hold out the last training song for validation.
  std::snprintf(name, sizeof(name), "fix%03d", args.train_songs - 1);
  std::ofstream(root / "valid_songs.txt") << name << "\n";

  // Equal-width band edges scaled to this rate so tiny windows still split.
  const double nyq = args.rate / 2.0;
  nlohmann::json scheme;
  for (const char* source : kStemNames)
    scheme[source] = {{nyq / 4.0, nyq / 8.0}, {nyq, nyq / 4.0}};
  std::ofstream(root / "scheme.json") << scheme.dump(2) << "\n";

  std::cout << "fixture at " << args.out_dir << ": " << args.train_songs << " train + "
            << args.test_songs << " test songs, " << args.seconds << " s at " << args.rate
            << " Hz\nvalidation list: " << (root / "valid_songs.txt").string()
            << "\nband scheme:     " << (root / "scheme.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"band-split recurrent source separation pipeline"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* t = app.add_subcommand("train", "train one per-source model");
  t->add_option("--config", train_args.config_path, "pipeline config (json)")->required();
  t->add_option("--source", train_args.source, "target stem (overrides datagen.target)");
  t->add_option("--set", train_args.sets, "dotted-path config override, e.g. train.batch=2");
  t->add_option("--patience", train_args.patience, "early-stop patience override");
  t->add_option("--run-dir", train_args.run_dir, "run directory (default <output_dir>/<source>)");
  t->add_option("--valid-list", train_args.valid_list, "file naming the validation songs");
  t->add_option("--hardware", train_args.hardware_file, "hardware spec json for energy estimates");

  SeparateArgs sep_args;
  auto* s = app.add_subcommand("separate", "split a song into stems");
  s->add_option("--checkpoint", sep_args.checkpoints, "source=path, repeatable")->required();
  s->add_option("--input", sep_args.input, "input wav")->required();
  s->add_option("--out", sep_args.out_dir, "output directory");
  s->add_option("--method", sep_args.method, "ola or fader");
  s->add_option("--segment", sep_args.segment, "segment length in seconds");
  s->add_option("--hop", sep_args.hop, "ola hop in seconds");
  s->add_option("--overlap", sep_args.overlap, "fader overlap fraction");

  EvaluateArgs eval_args;
  auto* e = app.add_subcommand("evaluate", "score estimates against a dataset split");
  e->add_option("--dataset", eval_args.dataset, "dataset root (default $BSRNN_DATASET_ROOT)");
  e->add_option("--split", eval_args.split, "split directory name (default test)");
  e->add_option("--estimates", eval_args.estimates_dir, "directory of <song>/<source>.wav");
  e->add_option("--checkpoint", eval_args.checkpoints, "source=path, repeatable");
  e->add_option("--method", eval_args.method, "ola or fader (checkpoint mode)");
  e->add_option("--out", eval_args.out_json, "write the report as json");

  ReportArgs rep_args;
  auto* r = app.add_subcommand("report", "summarize training runs and their pareto front");
  r->add_option("dirs", rep_args.run_dirs, "run directories")->required();
  r->add_option("--out", rep_args.out_json, "write the summary as json");

  FixtureArgs fix_args;
  auto* f = app.add_subcommand("make-fixture", "write a small synthetic dataset");
  f->add_option("--out", fix_args.out_dir, "fixture root directory")->required();
  f->add_option("--train-songs", fix_args.train_songs, "training song count");
  f->add_option("--test-songs", fix_args.test_songs, "test song count");
  f->add_option("--seconds", fix_args.seconds, "song length in seconds");
  f->add_option("--rate", fix_args.rate, "sample rate");
  f->add_option("--seed", fix_args.seed, "generator seed");

  int rc = 0;
  t->callback([&] { rc = cmd_train(train_args); });
  s->callback([&] { rc = cmd_separate(sep_args); });
  e->callback([&] { rc = cmd_evaluate(eval_args); });
  r->callback([&] { rc = cmd_report(rep_args); });
  f->callback([&] { rc = cmd_make_fixture(fix_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  } catch (const UserError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "fault: " << err.what() << "\n";
    return 2;
  }
  return rc;
}
