#include "rrtrack/cli.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>

#include "rrtrack/checkpoint.hpp"
#include "rrtrack/config.hpp"
#include "rrtrack/dataset.hpp"
#include "rrtrack/errors.hpp"
#include "rrtrack/eval.hpp"
#include "rrtrack/tracker.hpp"
#include "rrtrack/trainer.hpp"

namespace rrtrack {
namespace {

namespace fs = std::filesystem;

AppConfig config_from(const std::string& path) { return path.empty() ? AppConfig{} : load_config(path); }

BoundingBox parse_box(const std::string& text) {
  std::vector<double> v;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string part = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    std::size_t used = 0;
    double x;
    try {
      x = std::stod(part, &used);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("--init-box: '{}' is not a number", part));
    }
    if (used != part.size() || !std::isfinite(x)) throw UsageError(fmt::format("--init-box: bad value '{}'", part));
    v.push_back(x);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (v.size() != 4) throw UsageError("--init-box expects x1,y1,x2,y2");
  BoundingBox b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) throw UsageError("--init-box needs x1 < x2 and y1 < y2");
  return b;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  os << text;
  if (!os) throw FormatError("write failed: " + path.string());
}

std::vector<LoadedSequence> load_dataset(const fs::path& root) {
  const auto dirs = list_sequence_dirs(root);
  if (dirs.empty()) throw UsageError("no sequences (directories with annotations.txt) under " + root.string());
  std::vector<LoadedSequence> out;
  for (const auto& d : dirs) out.push_back(read_sequence(d));
  return out;
}

int cmd_gen_data(const std::string& config_path, const fs::path& out_dir, std::size_t count, std::size_t length,
                 std::uint64_t seed, std::ostream& out) {
  if (count == 0) throw UsageError("--count must be positive");
  if (length < 2) throw UsageError("--length must be at least 2");
  const auto config = config_from(config_path);
  SceneSampler sampler(config.train.synth);
  Rng master(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto seq = generate_sequence(sampler, length, master());
    write_sequence(out_dir / fmt::format("seq_{:05d}", i), seq);
  }
  fmt::print(out, "wrote {} sequences of {} frames to {}\n", count, length, out_dir.string());
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data, std::size_t iters, const fs::path& out_dir,
              std::optional<std::uint64_t> seed, std::ostream& out) {
  auto config = config_from(config_path);
  if (seed) config.train.seed = *seed;
  std::unique_ptr<SequenceSource> source;
  if (data.empty()) {
    source = std::make_unique<SyntheticSource>(config.train.synth);
  } else {
    std::vector<SyntheticSequence> seqs;
    for (auto& s : load_dataset(data)) seqs.push_back(std::move(s.seq));
    source = std::make_unique<DatasetSource>(std::move(seqs));
  }
  const auto result = train(config.train, *source, iters, out_dir);
  if (result.log.empty()) {
    fmt::print(out, "wrote initial checkpoint to {}\n", (out_dir / checkpoint_filename(0)).string());
  } else {
    const auto& last = result.log.back();
    fmt::print(out, "trained {} iterations; final stage {} (unroll {}), last loss {:.6f}\n", last.iteration,
               last.stage, last.unroll, last.loss);
  }
  return kExitOk;
}

int cmd_track(const std::string& config_path, const fs::path& ckpt, const fs::path& frames_dir,
              const std::string& init_box, const fs::path& out_path, bool no_reset, std::ostream& out) {
  const BoundingBox box = parse_box(init_box);
  auto config = config_from(config_path);
  if (no_reset) config.tracker.reset_enabled = false;
  const auto params = load_network(ckpt);
  const auto frames = read_frames(frames_dir);
  if (frames.size() < 2) throw UsageError("tracking needs at least two frames in " + frames_dir.string());
  const auto boxes = track_sequence(params, frames, box, config.tracker);
  std::string csv = std::string(kTrackCsvHeader) + "\n";
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    csv += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f}\n", i + 1, b.x1, b.y1, b.x2, b.y2);
  }
  write_text(out_path, csv);
  fmt::print(out, "tracked {} frames -> {}\n", boxes.size(), out_path.string());
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt, const fs::path& data, const std::string& mode,
             const fs::path& out_dir, bool oracle, bool no_reset, std::ostream& out) {
  if (mode != "ope" && mode != "vot") throw UsageError("--mode must be ope or vot");
  if (ckpt.empty() && !oracle) throw UsageError("--ckpt is required unless --oracle is given");
  auto config = config_from(config_path);
  if (no_reset) config.tracker.reset_enabled = false;
  const auto seqs = load_dataset(data);
  for (const auto& s : seqs) {
    if (s.seq.size() < 2) throw UsageError(s.name + ": evaluation needs at least two frames");
  }
  std::optional<NetworkParams> params;
  if (!ckpt.empty()) params = load_network(ckpt);

  const bool flags = std::all_of(seqs.begin(), seqs.end(), [](const auto& s) { return s.has_occlusion_flags; });
  std::map<std::string, std::vector<EvalResult>> per_method;
  auto run = [&](const std::string& name, SequenceTracker& tracker, const LoadedSequence& s) {
    per_method[name].push_back(mode == "ope" ? ope_run(tracker, s.seq, flags, config.vot.robustness_scale)
                                             : vot_evaluate(tracker, s.seq, flags, config.vot));
  };
  for (const auto& s : seqs) {
    if (params) {
      RecurrentSequenceTracker t(*params, config.tracker);
      run("recurrent", t, s);
    }
    StaticSequenceTracker st;
    run("static", st, s);
    if (oracle) {
      PlaybackSequenceTracker pt(s.seq.truth);
      run("ground_truth", pt, s);
    }
  }
  std::vector<NamedResult> named;
  for (const auto& [name, results] : per_method) named.push_back({name, aggregate(results, config.vot.robustness_scale)});
  const auto report = compare(named, flags);
  write_text(out_dir / "summary.csv", report.summary_csv);
  write_text(out_dir / "success_curve.csv", report.success_curve_csv);
  out << report.summary_csv;
  return kExitOk;
}

int cmd_bench(const std::string& config_path, const fs::path& ckpt, std::size_t frames, const std::string& csv_path,
              std::uint64_t seed, std::ostream& out) {
  if (frames == 0) throw UsageError("--frames must be positive");
  const auto config = config_from(config_path);
  const auto params = load_network(ckpt);
  SceneSampler sampler(config.train.synth);
  const auto seq = generate_sequence(sampler, frames + 1, seed);
  Tracker tracker(params, config.tracker);
  tracker.init(seq.frames[0], seq.truth[0]);
  std::vector<double> latency;
  latency.reserve(frames);
  for (std::size_t i = 1; i <= frames; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    tracker.step(seq.frames[i]);
    const auto t1 = std::chrono::steady_clock::now();
    latency.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  const auto report = summarize_latencies(latency);
  fmt::print(out, "frames,mean_ms,median_ms,fps\n{},{:.6f},{:.6f},{:.3f}\n", frames, report.mean_ms,
             report.median_ms, report.fps);
  if (!csv_path.empty()) {
    std::string csv = "frame_index,latency_ms\n";
    for (std::size_t i = 0; i < latency.size(); ++i) csv += fmt::format("{},{:.6f}\n", i + 1, latency[i]);
    write_text(csv_path, csv);
  }
  return kExitOk;
}

}  // namespace

BenchReport summarize_latencies(std::vector<double> latency_ms) {
  if (latency_ms.empty()) throw UsageError("no latencies to summarize");
  BenchReport r;
  r.latency_ms = latency_ms;
  r.mean_ms = std::accumulate(latency_ms.begin(), latency_ms.end(), 0.0) / static_cast<double>(latency_ms.size());
  std::sort(latency_ms.begin(), latency_ms.end());
  const std::size_t n = latency_ms.size();
  r.median_ms = n % 2 ? latency_ms[n / 2] : 0.5 * (latency_ms[n / 2 - 1] + latency_ms[n / 2]);
  r.fps = r.mean_ms > 0.0 ? 1000.0 / r.mean_ms : 0.0;
  return r;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recurrent single-object tracker: data generation, training, tracking, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);

  std::string out_path, data, ckpt, frames_dir, init_box, mode = "ope", csv_path;
  std::size_t count = 1, length = 32, iters = 0, bench_frames = 100;
  std::uint64_t seed = 0;
  bool oracle = false, no_reset = false;

  auto* gen = app.add_subcommand("gen-data", "write synthetic sequences");
  gen->add_option("--out", out_path, "output directory")->required();
  gen->add_option("--count", count, "number of sequences");
  gen->add_option("--length", length, "frames per sequence");
  gen->add_option("--seed", seed, "random seed");

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--data", data, "directory of sequences (synthetic on the fly when omitted)");
  tr->add_option("--iters", iters, "training iterations")->required();
  tr->add_option("--out", out_path, "output directory for checkpoints and loss.csv")->required();
  auto* train_seed = tr->add_option("--seed", seed, "overrides train.seed");

  auto* tk = app.add_subcommand("track", "track one sequence");
  tk->add_option("--ckpt", ckpt, "checkpoint")->required();
  tk->add_option("--frames-dir", frames_dir, "directory of PPM frames")->required();
  tk->add_option("--init-box", init_box, "x1,y1,x2,y2 on the first frame")->required();
  tk->add_option("--out", out_path, "track CSV")->required();
  tk->add_flag("--no-reset", no_reset, "disable the periodic LSTM state reset");

  auto* ev = app.add_subcommand("eval", "evaluate on a dataset");
  ev->add_option("--ckpt", ckpt, "checkpoint");
  ev->add_option("--data", data, "directory of sequences")->required();
  ev->add_option("--mode", mode, "ope or vot");
  ev->add_option("--out", out_path, "report directory")->required();
  ev->add_flag("--oracle", oracle, "add a ground-truth playback row");
  ev->add_flag("--no-reset", no_reset, "disable the periodic LSTM state reset");

  auto* be = app.add_subcommand("bench", "time tracking steps");
  be->add_option("--ckpt", ckpt, "checkpoint")->required();
  be->add_option("--frames", bench_frames, "number of timed steps");
  be->add_option("--out", csv_path, "per-frame latency CSV");
  be->add_option("--seed", seed, "seed of the synthetic frames");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, out_path, count, length, seed, out);
    if (tr->parsed()) {
      std::optional<std::uint64_t> s;
      if (train_seed->count() > 0) s = seed;
      return cmd_train(config_path, data, iters, out_path, s, out);
    }
    if (tk->parsed()) return cmd_track(config_path, ckpt, frames_dir, init_box, out_path, no_reset, out);
    if (ev->parsed()) return cmd_eval(config_path, ckpt, data, mode, out_path, oracle, no_reset, out);
    if (be->parsed()) return cmd_bench(config_path, ckpt, bench_frames, csv_path, seed, out);
  } catch (const UsageError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const FormatError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const ShapeError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const NumericalError& e) {
    fmt::print(err, "numerical error: {}\n", e.what());
    return kExitInternal;
  } catch (const std::exception& e) {
    fmt::print(err, "internal error: {}\n", e.what());
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace rrtrack
