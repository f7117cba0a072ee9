#pragma once

// Long-form result tables: writing metrics.csv / measures.csv, reading them
// back, aggregation across runs and tail-window means.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "../data.hpp"
#include "../errors.hpp"
#include "../layout.hpp"
#include "../measures.hpp"
#include "train.hpp"

namespace mmvae {

inline const char* const kMetricsHeader =
    "epoch,schedule,run_seed,beta,reconstruction_loss,latent_loss,total_loss,"
    "prediction_error";
inline const char* const kMeasuresHeader =
    "epoch,schedule,run_seed,measure,scope,modality,value";

inline constexpr const char* kMetricNames[] = {
    "beta", "reconstruction_loss", "latent_loss", "total_loss", "prediction_error"};

inline void write_metrics_csv(std::ostream& os, std::string_view schedule,
                              const std::vector<RunResult>& runs) {
  os << kMetricsHeader << '\n';
  for (const auto& r : runs)
    for (const auto& m : r.metrics)
      os << m.epoch << ',' << schedule << ',' << r.run_seed << ','
         << format_real(m.beta) << ',' << format_real(m.reconstruction_loss) << ','
         << format_real(m.latent_loss) << ',' << format_real(m.total_loss) << ','
         << format_real(m.prediction_error) << '\n';
}

inline void write_measures_csv(std::ostream& os, std::string_view schedule,
                               const std::vector<RunResult>& runs,
                               const ModalityLayout& layout) {
  os << kMeasuresHeader << '\n';
  for (const auto& r : runs)
    for (const auto& rep : r.measures) {
      auto row = [&](std::string_view measure, std::string_view scope,
                     std::string_view modality, double v) {
        os << rep.epoch << ',' << schedule << ',' << r.run_seed << ',' << measure
           << ',' << scope << ',' << modality << ',' << format_real(v) << '\n';
      };
      for (std::size_t m = 0; m < layout.modality_count(); ++m) {
        const auto& name = layout.modality(m).name;
        row("single_modality_error", "modality", name,
            rep.single_modality_error_modality[m]);
        row("single_modality_error", "all", name, rep.single_modality_error_all[m]);
        row("loss_of_precision", "modality", name, rep.loss_of_precision_modality[m]);
        row("loss_of_precision", "all", name, rep.loss_of_precision_all[m]);
      }
      row("baseline", "all", "", rep.baseline);
    }
}

/// One value of one series at one epoch of one run. Metrics use the metric
/// name as `measure` with empty scope and modality.
struct SeriesPoint {
  std::int64_t epoch = 0;
  std::string schedule;
  std::uint64_t run_seed = 0;
  std::string measure;
  std::string scope;
  std::string modality;
  double value = 0.0;
};

using SeriesKey = std::tuple<std::string, std::string, std::string, std::string>;

inline SeriesKey key_of(const SeriesPoint& p) {
  return {p.schedule, p.measure, p.scope, p.modality};
}

namespace table_detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
  T v{};
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end)
    throw InputError(where + ": cannot parse '" + s + "'");
  return v;
}

inline std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace table_detail

inline std::vector<SeriesPoint> read_metrics_csv(const std::filesystem::path& path) {
  using namespace table_detail;
  auto in = open(path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw InputError(path.string() + ": unexpected metrics header");
  std::vector<SeriesPoint> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split(line);
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (c.size() != 8) throw InputError(where + ": expected 8 fields");
    for (std::size_t k = 0; k < 5; ++k)
      out.push_back({parse_number<std::int64_t>(c[0], where), c[1],
                     parse_number<std::uint64_t>(c[2], where), kMetricNames[k], "",
                     "", parse_number<double>(c[3 + k], where)});
  }
  return out;
}

inline std::vector<SeriesPoint> read_measures_csv(const std::filesystem::path& path) {
  using namespace table_detail;
  auto in = open(path);
  std::string line;
  if (!std::getline(in, line) || line != kMeasuresHeader)
    throw InputError(path.string() + ": unexpected measures header");
  std::vector<SeriesPoint> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split(line);
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (c.size() != 7) throw InputError(where + ": expected 7 fields");
    out.push_back({parse_number<std::int64_t>(c[0], where), c[1],
                   parse_number<std::uint64_t>(c[2], where), c[3], c[4], c[5],
                   parse_number<double>(c[6], where)});
  }
  return out;
}

struct AggregatePoint {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t runs = 0;
};

/// Mean / min / max across runs per (series, epoch).
using Aggregate = std::map<SeriesKey, std::map<std::int64_t, AggregatePoint>>;

inline Aggregate aggregate(const std::vector<SeriesPoint>& points) {
  std::map<SeriesKey, std::map<std::int64_t, std::vector<double>>> grouped;
  for (const auto& p : points) grouped[key_of(p)][p.epoch].push_back(p.value);
  Aggregate out;
  for (const auto& [key, by_epoch] : grouped)
    for (const auto& [epoch, vs] : by_epoch) {
      AggregatePoint a;
      a.runs = vs.size();
      a.min = *std::min_element(vs.begin(), vs.end());
      a.max = *std::max_element(vs.begin(), vs.end());
      double s = 0.0;
      for (double v : vs) s += v;
      a.mean = std::clamp(s / static_cast<double>(vs.size()), a.min, a.max);
      out[key][epoch] = a;
    }
  return out;
}

inline void write_aggregate_csv(std::ostream& os, const Aggregate& agg) {
  os << "schedule,measure,scope,modality,epoch,mean,min,max,runs\n";
  for (const auto& [key, by_epoch] : agg)
    for (const auto& [epoch, a] : by_epoch)
      os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key)
         << ',' << std::get<3>(key) << ',' << epoch << ',' << format_real(a.mean)
         << ',' << format_real(a.min) << ',' << format_real(a.max) << ',' << a.runs
         << '\n';
}

/// Half-open epoch-label window (first, last].
struct Window {
  std::int64_t first = 0;
  std::int64_t last = 0;
  bool contains(std::int64_t e) const { return e > first && e <= last; }
};

/// The two tail windows (6/8 T, 7/8 T] and (7/8 T, T].
inline std::array<Window, 2> tail_windows(std::int64_t total_epochs) {
  const auto t78 = total_epochs - total_epochs / 8;
  const auto t68 = total_epochs - 2 * (total_epochs / 8);
  return {Window{t68, t78}, Window{t78, total_epochs}};
}

struct WindowStat {
  double mean = 0.0;  // mean over runs of each run's window average
  double std = 0.0;   // sample standard deviation of those run averages
  std::size_t runs = 0;
};

/// Per series: each run's average over the epochs inside `w`, then mean and
/// run-level spread.
inline std::map<SeriesKey, WindowStat> window_means(
    const std::vector<SeriesPoint>& points, const Window& w) {
  std::map<SeriesKey, std::map<std::uint64_t, std::pair<double, std::size_t>>> acc;
  for (const auto& p : points) {
    if (!w.contains(p.epoch)) continue;
    auto& a = acc[key_of(p)][p.run_seed];
    a.first += p.value;
    a.second += 1;
  }
  std::map<SeriesKey, WindowStat> out;
  for (const auto& [key, per_run] : acc) {
    std::vector<double> avgs;
    for (const auto& [seed, a] : per_run)
      avgs.push_back(a.first / static_cast<double>(a.second));
    WindowStat s;
    s.runs = avgs.size();
    for (double v : avgs) s.mean += v;
    s.mean /= static_cast<double>(avgs.size());
    if (avgs.size() > 1) {
      double ss = 0.0;
      for (double v : avgs) ss += (v - s.mean) * (v - s.mean);
      s.std = std::sqrt(ss / static_cast<double>(avgs.size() - 1));
    }
    out[key] = s;
  }
  return out;
}

inline void write_comparison_csv(
    std::ostream& os, const std::array<std::map<SeriesKey, WindowStat>, 2>& windows,
    const std::array<Window, 2>& bounds) {
  os << "schedule,measure,scope,modality,window,first_epoch,last_epoch,mean,std,"
        "runs\n";
  for (int w = 0; w < 2; ++w)
    for (const auto& [key, s] : windows[w])
      os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key)
         << ',' << std::get<3>(key) << ',' << (w + 1) << ',' << bounds[w].first
         << ',' << bounds[w].last << ',' << format_real(s.mean) << ','
         << format_real(s.std) << ',' << s.runs << '\n';
}

}  // namespace mmvae
