#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "../errors.hpp"
#include "../layout.hpp"
#include "config.hpp"
#include "figures.hpp"
#include "tables.hpp"
#include "train.hpp"

namespace mmvae {

namespace fs = std::filesystem;

struct ExperimentResult {
  RunConfig config;
  fs::path output_dir;
  std::vector<RunResult> runs;
  nlohmann::json manifest;

  std::size_t succeeded() const {
    std::size_t n = 0;
    for (const auto& r : runs) n += r.failed ? 0 : 1;
    return n;
  }
};

namespace experiment_detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExperimentError("cannot write '" + path.string() + "'");
  out << text;
}

inline std::string run_dir_name(std::uint64_t seed) {
  return "run_" + std::to_string(seed);
}

}  // namespace experiment_detail

using ProgressFn = std::function<void(const std::string&)>;

struct ExperimentOptions {
  ProgressFn progress;
  // Single-run layout: checkpoints/epoch_<n>.ckpt instead of one directory
  // per run seed.
  bool flat_checkpoints = false;
};

/// Runs config.runs seeded training runs (seeds base_seed + i) and writes
/// manifest.json, metrics.csv, measures.csv, aggregate.csv, checkpoints and,
/// if enabled, figures/*.svg into config.output_dir.
inline ExperimentResult run_experiment(const RunConfig& config,
                                       const ExperimentOptions& options = {}) {
  const auto& progress = options.progress;
  if (options.flat_checkpoints && config.runs != 1)
    throw UsageError("flat checkpoint layout needs exactly one run");
  using namespace experiment_detail;
  config.validate();
  const fs::path out = config.output_dir;
  fs::create_directories(out);

  const auto data = load_data(config);
  const auto schedule = std::string(to_string(config.schedule.kind));

  ExperimentResult result;
  result.config = config;
  result.output_dir = out;
  result.runs.resize(config.runs);

  std::mutex log_mutex;
  auto work = [&](std::size_t i) {
    const std::uint64_t seed = config.base_seed + i;
    const auto ckpt = options.flat_checkpoints
                          ? out / "checkpoints"
                          : out / "checkpoints" / run_dir_name(seed);
    EvalObserver obs;
    if (progress)
      obs = [&, seed](const MetricRow& m, const MeasureReport&) {
        std::lock_guard lock(log_mutex);
        progress(schedule + " seed " + std::to_string(seed) + " epoch " +
                 std::to_string(m.epoch) + " pe " + format_real(m.prediction_error));
      };
    result.runs[i] = train_run(config, seed, data, ckpt, obs);
  };
  if (config.jobs <= 1) {
    for (std::size_t i = 0; i < config.runs; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(config.jobs, config.runs); ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < config.runs;) work(i);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<RunResult> ok;
  for (const auto& r : result.runs)
    if (!r.failed) ok.push_back(r);

  nlohmann::json m;
  m["format"] = "mmvae-experiment";
  m["code_version"] = std::string(kCodeVersion);
  m["config"] = to_json(config);
  m["config_hash"] = config_hash(config);
  m["schedule"] = schedule;
  m["dataset"] = {{"provenance", data.train.provenance},
                  {"samples", data.train.size()},
                  {"fingerprint", dataset_fingerprint(data.train)}};
  m["eval_set"] = {{"source", config.eval_source == EvalSource::train ? "train"
                                                                      : "heldout"},
                   {"size", data.eval.size()},
                   {"fingerprint", dataset_fingerprint(data.eval)}};
  auto seeds = nlohmann::json::array();
  auto runs = nlohmann::json::array();
  for (const auto& r : result.runs) {
    seeds.push_back(r.run_seed);
    nlohmann::json e = {{"seed", r.run_seed},
                        {"status", r.failed ? "failed" : "ok"},
                        {"checkpoints",
                         options.flat_checkpoints
                             ? std::string("checkpoints")
                             : (fs::path("checkpoints") / run_dir_name(r.run_seed))
                                   .generic_string()}};
    if (r.failed) e["error"] = r.error;
    runs.push_back(e);
  }
  m["seeds"] = seeds;
  m["runs"] = runs;
  m["runs_succeeded"] = ok.size();
  m["outputs"] = {"metrics.csv", "measures.csv", "aggregate.csv"};
  result.manifest = m;
  write_text(out / "manifest.json", m.dump(2) + "\n");

  if (ok.empty())
    throw ExperimentError("all " + std::to_string(config.runs) + " runs failed; first: " +
                          result.runs.front().error);

  const auto& layout = ModalityLayout::standard();
  {
    std::ostringstream os;
    write_metrics_csv(os, schedule, ok);
    write_text(out / "metrics.csv", os.str());
  }
  {
    std::ostringstream os;
    write_measures_csv(os, schedule, ok, layout);
    write_text(out / "measures.csv", os.str());
  }
  auto points = read_metrics_csv(out / "metrics.csv");
  auto measures = read_measures_csv(out / "measures.csv");
  points.insert(points.end(), measures.begin(), measures.end());
  {
    std::ostringstream os;
    write_aggregate_csv(os, aggregate(points));
    write_text(out / "aggregate.csv", os.str());
  }
  if (config.figures) write_figures(points, out / "figures");
  return result;
}

/// Experiment directory contents needed for cross-schedule comparison.
struct ExperimentOutputs {
  fs::path dir;
  nlohmann::json manifest;
  std::vector<SeriesPoint> points;
};

inline ExperimentOutputs load_experiment(const fs::path& dir) {
  ExperimentOutputs e;
  e.dir = dir;
  std::ifstream in(dir / "manifest.json");
  if (!in) throw UsageError("no manifest.json in '" + dir.string() + "'");
  try {
    e.manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw InputError("malformed manifest in '" + dir.string() + "': " + ex.what());
  }
  e.points = read_metrics_csv(dir / "metrics.csv");
  auto measures = read_measures_csv(dir / "measures.csv");
  e.points.insert(e.points.end(), measures.begin(), measures.end());
  return e;
}

struct Comparison {
  std::array<Window, 2> windows;
  std::array<std::map<SeriesKey, WindowStat>, 2> stats;

  const WindowStat& at(int window, const std::string& schedule,
                       const std::string& measure, const std::string& scope = "",
                       const std::string& modality = "") const {
    const auto it = stats[window].find({schedule, measure, scope, modality});
    if (it == stats[window].end())
      throw UsageError("no series " + schedule + "/" + measure + "/" + scope + "/" +
                       modality);
    return it->second;
  }
};

/// Window means over the two tail windows for several experiments, which
/// must share the evaluation set and the epoch count. A schedule that occurs
/// more than once is labelled <schedule>#<k> from its second occurrence on.
inline Comparison compare_schedules(const std::vector<ExperimentOutputs>& exps) {
  if (exps.empty()) throw UsageError("nothing to compare");
  const auto& ref = exps.front().manifest;
  std::map<std::string, int> seen;
  std::vector<SeriesPoint> all;
  for (const auto& e : exps) {
    if (e.manifest.at("eval_set") != ref.at("eval_set"))
      throw UsageError("experiments '" + exps.front().dir.string() + "' and '" +
                       e.dir.string() + "' use different evaluation sets");
    if (e.manifest.at("dataset").at("fingerprint") !=
        ref.at("dataset").at("fingerprint"))
      throw UsageError("experiments '" + exps.front().dir.string() + "' and '" +
                       e.dir.string() + "' use different datasets");
    if (e.manifest.at("config").at("total_epochs") !=
        ref.at("config").at("total_epochs"))
      throw UsageError("experiments differ in total_epochs");
    const auto s = e.manifest.at("schedule").get<std::string>();
    const int k = ++seen[s];
    const std::string label = k == 1 ? s : s + "#" + std::to_string(k);
    for (auto p : e.points) {
      p.schedule = label;
      all.push_back(std::move(p));
    }
  }
  Comparison c;
  c.windows = tail_windows(ref.at("config").at("total_epochs").get<std::int64_t>());
  for (int w = 0; w < 2; ++w) c.stats[w] = window_means(all, c.windows[w]);
  return c;
}

inline void write_comparison(const Comparison& c, const fs::path& path) {
  std::ostringstream os;
  write_comparison_csv(os, c.stats, c.windows);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  experiment_detail::write_text(path, os.str());
}

}  // namespace mmvae
