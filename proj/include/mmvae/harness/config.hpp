#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "../errors.hpp"
#include "../nn.hpp"
#include "../schedules.hpp"
#include "../synthetic.hpp"

namespace mmvae {

inline constexpr std::string_view kCodeVersion = "mmvae-lab 1.0.0";
inline constexpr const char* kOutputRootEnv = "MMVAE_OUTPUT_ROOT";

enum class EvalSource { train, heldout };

struct DatasetConfig {
  std::string source = "synthetic";  // synthetic | csv
  std::string path;                  // csv only
  std::size_t n_samples = 2000;
  std::uint64_t seed = 7;
  SyntheticParams synthetic;
};

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::constant0;
  std::int64_t warmup_epochs = 1000;
  std::int64_t cycle_length = 80;
  std::optional<std::int64_t> tail_start;  // default total - total / 8
  std::int64_t descent_floor = 4;
};

struct RunConfig {
  ScheduleConfig schedule;
  std::int64_t total_epochs = 80000;
  std::size_t batch_size = 100;
  std::size_t hidden_width = 32;
  AdamSettings optimizer;
  DatasetConfig dataset;
  std::int64_t eval_every = 100;
  std::size_t eval_set_size = 1024;
  EvalSource eval_source = EvalSource::train;
  std::uint64_t eval_seed = 11;
  std::int64_t checkpoint_every = 0;  // 0: only the final epoch
  std::size_t runs = 20;
  std::uint64_t base_seed = 1;
  std::size_t jobs = 1;
  bool figures = true;
  std::string output_dir;

  BetaSchedule beta_schedule() const {
    BetaSchedule s = BetaSchedule::make(schedule.kind, total_epochs);
    s.warmup_epochs = schedule.warmup_epochs;
    s.cycle_length = schedule.cycle_length;
    if (schedule.tail_start) s.tail_start = *schedule.tail_start;
    s.descent_floor = schedule.descent_floor;
    s.validate();
    return s;
  }

  void validate() const {
    if (total_epochs < 1) throw ConfigurationError("total_epochs must be >= 1");
    if (batch_size < 1) throw ConfigurationError("batch_size must be >= 1");
    if (hidden_width < 1) throw ConfigurationError("hidden_width must be >= 1");
    if (eval_every < 1) throw ConfigurationError("eval_every must be >= 1");
    if (total_epochs % eval_every != 0)
      throw ConfigurationError("eval_every must divide total_epochs");
    if (eval_set_size < 1) throw ConfigurationError("eval_set_size must be >= 1");
    if (checkpoint_every < 0)
      throw ConfigurationError("checkpoint_every must be >= 0");
    if (runs < 1) throw ConfigurationError("runs must be >= 1");
    if (jobs < 1) throw ConfigurationError("jobs must be >= 1");
    if (dataset.n_samples < 1) throw ConfigurationError("n_samples must be >= 1");
    if (dataset.source != "synthetic" && dataset.source != "csv")
      throw ConfigurationError("dataset.source must be 'synthetic' or 'csv'");
    if (dataset.source == "csv" && dataset.path.empty())
      throw ConfigurationError("dataset.path is required for csv input");
    if (!(optimizer.learning_rate > 0.0))
      throw ConfigurationError("optimizer.learning_rate must be positive");
    beta_schedule();
  }
};

// ---------------------------------------------------------------------------
// JSON mapping

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  const auto& sp = c.dataset.synthetic;
  json j;
  j["schedule"] = {{"kind", std::string(to_string(c.schedule.kind))},
                   {"warmup_epochs", c.schedule.warmup_epochs},
                   {"cycle_length", c.schedule.cycle_length},
                   {"tail_start", c.schedule.tail_start
                                      ? json(*c.schedule.tail_start)
                                      : json(nullptr)},
                   {"descent_floor", c.schedule.descent_floor}};
  j["total_epochs"] = c.total_epochs;
  j["batch_size"] = c.batch_size;
  j["hidden_width"] = c.hidden_width;
  j["optimizer"] = {{"learning_rate", c.optimizer.learning_rate},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"epsilon", c.optimizer.epsilon}};
  j["dataset"] = {{"source", c.dataset.source},
                  {"path", c.dataset.path},
                  {"n_samples", c.dataset.n_samples},
                  {"seed", c.dataset.seed},
                  {"noise", sp.noise},
                  {"dt", sp.dt},
                  {"contact_threshold", sp.contact_threshold},
                  {"contact_jitter", sp.contact_jitter},
                  {"episode_length", sp.episode_length},
                  {"command_scale", sp.command_scale},
                  {"command_smoothness", sp.command_smoothness},
                  {"reach_gain", sp.reach_gain}};
  j["eval_every"] = c.eval_every;
  j["eval_set_size"] = c.eval_set_size;
  j["eval_source"] = c.eval_source == EvalSource::train ? "train" : "heldout";
  j["eval_seed"] = c.eval_seed;
  j["checkpoint_every"] = c.checkpoint_every;
  j["runs"] = c.runs;
  j["base_seed"] = c.base_seed;
  j["jobs"] = c.jobs;
  j["figures"] = c.figures;
  j["output_dir"] = c.output_dir;
  return j;
}

namespace config_detail {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("config field '") + key +
                             "': " + e.what());
  }
}

inline void reject_unknown(const nlohmann::json& j,
                           std::initializer_list<std::string_view> known,
                           const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto k : known) ok = ok || it.key() == k;
    if (!ok)
      throw ConfigurationError("unknown config field '" + where + it.key() + "'");
  }
}

}  // namespace config_detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using config_detail::read;
  using config_detail::reject_unknown;
  if (!j.is_object()) throw ConfigurationError("config must be a JSON object");
  reject_unknown(j,
                 {"schedule", "total_epochs", "batch_size", "hidden_width",
                  "optimizer", "dataset", "eval_every", "eval_set_size",
                  "eval_source", "eval_seed", "checkpoint_every", "runs",
                  "base_seed", "jobs", "figures", "output_dir"},
                 "");
  RunConfig c;
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    reject_unknown(s, {"kind", "warmup_epochs", "cycle_length", "tail_start",
                       "descent_floor"},
                   "schedule.");
    std::string kind = std::string(to_string(c.schedule.kind));
    read(s, "kind", kind);
    c.schedule.kind = schedule_kind_from_string(kind);
    read(s, "warmup_epochs", c.schedule.warmup_epochs);
    read(s, "cycle_length", c.schedule.cycle_length);
    read(s, "descent_floor", c.schedule.descent_floor);
    if (s.contains("tail_start") && !s.at("tail_start").is_null()) {
      std::int64_t t = 0;
      read(s, "tail_start", t);
      c.schedule.tail_start = t;
    }
  }
  read(j, "total_epochs", c.total_epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "hidden_width", c.hidden_width);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    reject_unknown(o, {"learning_rate", "beta1", "beta2", "epsilon"}, "optimizer.");
    read(o, "learning_rate", c.optimizer.learning_rate);
    read(o, "beta1", c.optimizer.beta1);
    read(o, "beta2", c.optimizer.beta2);
    read(o, "epsilon", c.optimizer.epsilon);
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    reject_unknown(d,
                   {"source", "path", "n_samples", "seed", "noise", "dt",
                    "contact_threshold", "contact_jitter", "episode_length",
                    "command_scale", "command_smoothness", "reach_gain"},
                   "dataset.");
    auto& sp = c.dataset.synthetic;
    read(d, "source", c.dataset.source);
    read(d, "path", c.dataset.path);
    read(d, "n_samples", c.dataset.n_samples);
    read(d, "seed", c.dataset.seed);
    read(d, "noise", sp.noise);
    read(d, "dt", sp.dt);
    read(d, "contact_threshold", sp.contact_threshold);
    read(d, "contact_jitter", sp.contact_jitter);
    read(d, "episode_length", sp.episode_length);
    read(d, "command_scale", sp.command_scale);
    read(d, "command_smoothness", sp.command_smoothness);
    read(d, "reach_gain", sp.reach_gain);
  }
  read(j, "eval_every", c.eval_every);
  read(j, "eval_set_size", c.eval_set_size);
  if (j.contains("eval_source")) {
    std::string src;
    read(j, "eval_source", src);
    if (src == "train") c.eval_source = EvalSource::train;
    else if (src == "heldout") c.eval_source = EvalSource::heldout;
    else throw ConfigurationError("eval_source must be 'train' or 'heldout'");
  }
  read(j, "eval_seed", c.eval_seed);
  read(j, "checkpoint_every", c.checkpoint_every);
  read(j, "runs", c.runs);
  read(j, "base_seed", c.base_seed);
  read(j, "jobs", c.jobs);
  read(j, "figures", c.figures);
  read(j, "output_dir", c.output_dir);
  return c;
}

/// Applies `key.path=value` overrides. Values are parsed as JSON when they
/// parse, and taken as strings otherwise.
inline nlohmann::json apply_overrides(nlohmann::json j,
                                      const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    auto text = std::string_view(o);
    if (text.starts_with("--")) text.remove_prefix(2);
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw ConfigurationError("override '" + o + "' is not of the form key=value");
    const std::string key(text.substr(0, eq));
    const std::string raw(text.substr(eq + 1));
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      value = raw;
    }
    nlohmann::json* node = &j;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->is_object()) *node = nlohmann::json::object();
      node = &(*node)[parts[i]];
    }
    if (!node->is_object()) *node = nlohmann::json::object();
    (*node)[parts.back()] = value;
  }
  return j;
}

inline RunConfig load_run_config(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides = {}) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open config '" + path.string() + "'");
    try {
      j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigurationError("config '" + path.string() + "': " + e.what());
    }
    // A manifest carries the resolved config under "config".
    if (j.contains("config") && j.contains("config_hash")) j = j.at("config");
  }
  auto c = run_config_from_json(apply_overrides(std::move(j), overrides));
  if (c.output_dir.empty()) {
    const char* root = std::getenv(kOutputRootEnv);
    c.output_dir = (std::filesystem::path(root ? root : "runs") /
                    std::string(to_string(c.schedule.kind)))
                       .string();
  }
  c.validate();
  return c;
}

/// 64-bit FNV-1a, used for config and eval-set fingerprints.
inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Fingerprint of everything that determines results (output_dir and jobs
/// excluded).
inline std::string config_hash(const RunConfig& c) {
  auto j = to_json(c);
  j.erase("output_dir");
  j.erase("jobs");
  j.erase("figures");
  return hex64(fnv1a(j.dump()));
}

}  // namespace mmvae
