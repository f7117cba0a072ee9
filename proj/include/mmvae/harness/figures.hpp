#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "svg.hpp"
#include "tables.hpp"

namespace mmvae {

namespace figure_detail {

inline ChartSeries series_of(const std::map<std::int64_t, AggregatePoint>& by_epoch,
                             std::string label) {
  ChartSeries s;
  s.label = std::move(label);
  for (const auto& [epoch, a] : by_epoch) {
    s.x.push_back(static_cast<double>(epoch));
    s.y.push_back(a.mean);
    s.lo.push_back(a.min);
    s.hi.push_back(a.max);
  }
  return s;
}

inline void save(const std::filesystem::path& path, const LineChart& chart) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExperimentError("cannot write '" + path.string() + "'");
  out << render_svg(chart);
}

}  // namespace figure_detail

/// Writes the standard chart set for the given points (one or more
/// schedules) into `dir`. Returns the files written.
inline std::vector<std::filesystem::path> write_figures(
    const std::vector<SeriesPoint>& points, const std::filesystem::path& dir) {
  using figure_detail::save;
  using figure_detail::series_of;
  std::filesystem::create_directories(dir);
  const auto agg = aggregate(points);
  std::set<std::string> schedules, modalities;
  for (const auto& [key, _] : agg) {
    schedules.insert(std::get<0>(key));
    if (!std::get<3>(key).empty()) modalities.insert(std::get<3>(key));
  }
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const LineChart& chart) {
    if (chart.series.empty()) return;
    save(dir / name, chart);
    written.push_back(dir / name);
  };

  // Losses and baseline: one line per schedule.
  for (std::string metric : {"prediction_error", "reconstruction_loss", "latent_loss",
                             "total_loss", "beta", "baseline"}) {
    LineChart c;
    c.title = metric;
    c.y_label = metric;
    const std::string scope = metric == "baseline" ? "all" : "";
    for (const auto& s : schedules) {
      const auto it = agg.find({s, metric, scope, ""});
      if (it != agg.end()) c.series.push_back(series_of(it->second, s));
    }
    emit(metric + ".svg", c);
  }

  // Measure families: one line per modality, one chart per schedule.
  for (const auto& s : schedules) {
    for (std::string measure : {"single_modality_error", "loss_of_precision"})
      for (std::string scope : {"modality", "all"}) {
        LineChart c;
        c.title = s + ": " + measure + " (" + scope + ")";
        c.y_label = "KL";
        for (const auto& m : modalities) {
          const auto it = agg.find({s, measure, scope, m});
          if (it != agg.end()) c.series.push_back(series_of(it->second, m));
        }
        emit(s + "_" + measure + "_" + scope + ".svg", c);
      }
    // Per modality: the four measures side by side.
    for (const auto& m : modalities) {
      LineChart c;
      c.title = s + ": " + m;
      c.y_label = "KL";
      for (std::string measure : {"single_modality_error", "loss_of_precision"})
        for (std::string scope : {"modality", "all"}) {
          const auto it = agg.find({s, measure, scope, m});
          if (it != agg.end())
            c.series.push_back(series_of(it->second, measure + "/" + scope));
        }
      emit(s + "_modality_" + m + ".svg", c);
    }
  }
  return written;
}

}  // namespace mmvae
