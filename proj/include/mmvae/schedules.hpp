#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace mmvae {

enum class ScheduleKind { constant1, constant0, dyn_plateau0, dyn_plateau1 };

inline constexpr ScheduleKind kAllSchedules[] = {
    ScheduleKind::constant1, ScheduleKind::constant0,
    ScheduleKind::dyn_plateau0, ScheduleKind::dyn_plateau1};

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::constant1: return "constant1";
    case ScheduleKind::constant0: return "constant0";
    case ScheduleKind::dyn_plateau0: return "dyn_plateau0";
    case ScheduleKind::dyn_plateau1: return "dyn_plateau1";
  }
  return "?";
}

inline ScheduleKind schedule_kind_from_string(std::string_view s) {
  for (auto k : kAllSchedules)
    if (to_string(k) == s) return k;
  throw ConfigurationError("unknown schedule kind '" + std::string(s) + "'");
}

/// Epoch -> KL weight.
///
/// constant1     beta = 1.
/// constant0     linear ramp 1 -> 0 over [0, warmup_epochs), then 0.
/// dyn_plateau*  cycles of `cycle_length` epochs. Cycle k starts at beta = 1
///               and descends linearly to 0 over d(k) epochs, where
///               d(k) = max(descent_floor, round(L * (1 - k / K))),
///               K = floor(tail_start / L); the rest of the cycle is 0.
///               From tail_start on, plateau0 holds 0 and plateau1 holds 1.
struct BetaSchedule {
  ScheduleKind kind = ScheduleKind::constant0;
  std::int64_t total_epochs = 80000;
  std::int64_t warmup_epochs = 1000;
  std::int64_t cycle_length = 80;
  std::int64_t tail_start = 70000;
  std::int64_t descent_floor = 4;

  /// Defaults scaled to `total`: tail_start = total - total / 8.
  static BetaSchedule make(ScheduleKind kind, std::int64_t total) {
    BetaSchedule s;
    s.kind = kind;
    s.total_epochs = total;
    s.tail_start = total - total / 8;
    s.validate();
    return s;
  }

  void validate() const {
    if (total_epochs < 1) throw ConfigurationError("total_epochs must be >= 1");
    if (warmup_epochs < 0) throw ConfigurationError("warmup_epochs must be >= 0");
    if (cycle_length < 1) throw ConfigurationError("cycle_length must be >= 1");
    if (tail_start < 0 || tail_start > total_epochs)
      throw ConfigurationError("tail_start must lie in [0, total_epochs]");
    if (descent_floor < 1 || descent_floor > cycle_length)
      throw ConfigurationError("descent_floor must lie in [1, cycle_length]");
  }

  bool dynamic() const {
    return kind == ScheduleKind::dyn_plateau0 ||
           kind == ScheduleKind::dyn_plateau1;
  }

  /// Number of cycles that start before tail_start scale the descent law.
  std::int64_t descent_cycles() const {
    return std::max<std::int64_t>(1, tail_start / cycle_length);
  }

  /// Descent length d(k) of dynamic cycle k.
  std::int64_t descent_length(std::int64_t cycle) const {
    const double frac = 1.0 - static_cast<double>(cycle) /
                                  static_cast<double>(descent_cycles());
    const auto d = static_cast<std::int64_t>(
        std::lround(static_cast<double>(cycle_length) * frac));
    return std::clamp(d, descent_floor, cycle_length);
  }

  double beta_at(std::int64_t epoch) const {
    if (epoch < 0 || epoch >= total_epochs)
      throw UsageError("epoch " + std::to_string(epoch) +
                       " outside schedule range [0, " +
                       std::to_string(total_epochs) + ")");
    switch (kind) {
      case ScheduleKind::constant1:
        return 1.0;
      case ScheduleKind::constant0:
        if (epoch >= warmup_epochs) return 0.0;
        return 1.0 - static_cast<double>(epoch) /
                         static_cast<double>(warmup_epochs);
      case ScheduleKind::dyn_plateau0:
      case ScheduleKind::dyn_plateau1: {
        if (epoch >= tail_start)
          return kind == ScheduleKind::dyn_plateau1 ? 1.0 : 0.0;
        const std::int64_t cycle = epoch / cycle_length;
        const std::int64_t pos = epoch % cycle_length;
        const std::int64_t d = descent_length(cycle);
        if (pos >= d) return 0.0;
        return 1.0 - static_cast<double>(pos) / static_cast<double>(d);
      }
    }
    return 0.0;
  }
};

inline double beta_at(const BetaSchedule& s, std::int64_t epoch) {
  return s.beta_at(epoch);
}

/// (epoch, beta) for epochs 0, stride, 2*stride, ... below total_epochs.
inline std::vector<std::pair<std::int64_t, double>> schedule_table(
    const BetaSchedule& s, std::int64_t stride) {
  if (stride < 1) throw UsageError("stride must be >= 1");
  std::vector<std::pair<std::int64_t, double>> out;
  for (std::int64_t e = 0; e < s.total_epochs; e += stride)
    out.emplace_back(e, s.beta_at(e));
  return out;
}

/// Two-column CSV `epoch,beta`.
inline void write_schedule_csv(
    std::ostream& os, const std::vector<std::pair<std::int64_t, double>>& t) {
  os << "epoch,beta\n";
  char buf[64];
  for (const auto& [e, b] : t) {
    std::snprintf(buf, sizeof buf, "%.17g", b);
    os << e << ',' << buf << '\n';
  }
}

}  // namespace mmvae
