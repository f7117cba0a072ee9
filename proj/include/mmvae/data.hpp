#pragma once

// Datasets, [-1, 1] normalization, muting masks, the augmentation stream and
// CSV ingestion. Samples are stored one per column in layout order.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"
#include "layout.hpp"
#include "rng.hpp"

namespace mmvae {

inline constexpr double kMuteValue = -2.0;

/// Mute flags per (modality, timestep).
class MaskSpec {
 public:
  explicit MaskSpec(std::size_t modalities = 5)
      : flags_(modalities, {false, false}) {}

  static MaskSpec none(std::size_t modalities) { return MaskSpec(modalities); }

  static MaskSpec all(std::size_t modalities) {
    MaskSpec m(modalities);
    for (auto& f : m.flags_) f = {true, true};
    return m;
  }

  /// Everything muted except modality `keep` at timestep `t`.
  static MaskSpec all_except(std::size_t modalities, std::size_t keep,
                             Timestep t) {
    auto m = all(modalities);
    m.set(keep, t, false);
    return m;
  }

  /// Modality `muted` at both timesteps, everything else observed.
  static MaskSpec modality(std::size_t modalities, std::size_t muted) {
    MaskSpec m(modalities);
    m.set(muted, Timestep::previous, true);
    m.set(muted, Timestep::current, true);
    return m;
  }

  /// Every modality muted at timestep `t`.
  static MaskSpec timestep(std::size_t modalities, Timestep t) {
    MaskSpec m(modalities);
    for (std::size_t i = 0; i < modalities; ++i) m.set(i, t, true);
    return m;
  }

  std::size_t modality_count() const { return flags_.size(); }

  bool muted(std::size_t m, Timestep t) const {
    return flags_.at(m)[static_cast<std::size_t>(t)];
  }
  void set(std::size_t m, Timestep t, bool value) {
    flags_.at(m)[static_cast<std::size_t>(t)] = value;
  }

  std::size_t muted_entries(const ModalityLayout& layout) const {
    std::size_t n = 0;
    for (std::size_t m = 0; m < flags_.size(); ++m)
      n += layout.dim(m) * (flags_[m][0] + flags_[m][1]);
    return n;
  }

  /// e.g. "joint:tm1,t;vision:-;..." for diagnostics.
  std::string describe(const ModalityLayout& layout) const {
    std::string s;
    for (std::size_t m = 0; m < flags_.size(); ++m) {
      if (m) s += ';';
      s += layout.modality(m).name + ':' + (flags_[m][0] ? "M" : "o") +
           (flags_[m][1] ? "M" : "o");
    }
    return s;
  }

  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;

 private:
  std::vector<std::array<bool, 2>> flags_;
};

inline void apply_mask_inplace(Eigen::Ref<Eigen::MatrixXd> x, const MaskSpec& mask,
                               const ModalityLayout& layout) {
  if (mask.modality_count() != layout.modality_count())
    throw UsageError("mask and layout disagree on modality count");
  for (std::size_t m = 0; m < layout.modality_count(); ++m)
    for (auto t : {Timestep::previous, Timestep::current})
      if (mask.muted(m, t))
        x.middleRows(static_cast<Eigen::Index>(layout.index(m, t, 0)),
                     static_cast<Eigen::Index>(layout.dim(m)))
            .setConstant(kMuteValue);
}

/// Copy of x with muted positions set to the sentinel -2.
inline Eigen::VectorXd apply_mask(const Eigen::VectorXd& x, const MaskSpec& mask,
                                  const ModalityLayout& layout) {
  if (x.size() != static_cast<Eigen::Index>(layout.total_dim()))
    throw UsageError("sample length does not match layout");
  Eigen::VectorXd out = x;
  apply_mask_inplace(out, mask, layout);
  return out;
}

inline Eigen::MatrixXd apply_mask(const Eigen::MatrixXd& x, const MaskSpec& mask,
                                  const ModalityLayout& layout) {
  if (x.rows() != static_cast<Eigen::Index>(layout.total_dim()))
    throw UsageError("sample length does not match layout");
  Eigen::MatrixXd out = x;
  apply_mask_inplace(out, mask, layout);
  return out;
}

/// Per-dimension affine statistics mapping [min, max] onto [-1, 1].
struct NormalizationStats {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const {
    const Eigen::ArrayXd span = (max - min).array();
    return ((2.0 * (raw.colwise() - min).array()).colwise() / span - 1.0)
        .matrix();
  }

  Eigen::MatrixXd invert(const Eigen::MatrixXd& normalized) const {
    const Eigen::ArrayXd span = (max - min).array();
    return (((normalized.array() + 1.0).colwise() * span * 0.5).matrix())
               .colwise() +
           min;
  }
};

struct Dataset {
  ModalityLayout layout = ModalityLayout::standard();
  Eigen::MatrixXd targets;  // normalized, one fully observed sample per column
  NormalizationStats stats;
  std::string provenance;

  std::size_t size() const { return static_cast<std::size_t>(targets.cols()); }
  Eigen::VectorXd sample(std::size_t i) const {
    return targets.col(static_cast<Eigen::Index>(i));
  }
  Eigen::MatrixXd raw() const { return stats.invert(targets); }

  /// Columns picked by index, same normalization.
  Dataset subset(const std::vector<std::size_t>& columns) const {
    Dataset out{layout, Eigen::MatrixXd(targets.rows(),
                                        static_cast<Eigen::Index>(columns.size())),
                stats, provenance};
    for (std::size_t j = 0; j < columns.size(); ++j)
      out.targets.col(static_cast<Eigen::Index>(j)) =
          targets.col(static_cast<Eigen::Index>(columns[j]));
    return out;
  }
};

/// Maps each row of `raw` (dims x samples) affinely onto [-1, 1].
inline Dataset normalize(const Eigen::MatrixXd& raw, const ModalityLayout& layout,
                         std::string provenance = {}) {
  if (raw.rows() != static_cast<Eigen::Index>(layout.total_dim()))
    throw IngestionError("raw data has " + std::to_string(raw.rows()) +
                         " columns, layout needs " +
                         std::to_string(layout.total_dim()));
  if (raw.cols() == 0) throw IngestionError("raw data has no samples");
  if (!raw.allFinite()) throw IngestionError("raw data contains non-finite values");
  Dataset ds;
  ds.layout = layout;
  ds.provenance = std::move(provenance);
  ds.stats.min = raw.rowwise().minCoeff();
  ds.stats.max = raw.rowwise().maxCoeff();
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    if (!(ds.stats.max[i] > ds.stats.min[i]))
      throw IngestionError("column '" +
                           layout.column_name(static_cast<std::size_t>(i)) +
                           "' is constant and cannot be normalized");
  ds.targets = ds.stats.apply(raw);
  // Endpoints land exactly on +-1; guard against rounding just outside.
  ds.targets = ds.targets.array().max(-1.0).min(1.0).matrix();
  return ds;
}

inline Eigen::MatrixXd denormalize(const Dataset& ds) { return ds.raw(); }

// ---------------------------------------------------------------------------
// Augmentation

enum class AugmentationKind {
  original,             // nothing muted
  current_muted,        // every modality at t muted
  modality_muted,       // one modality muted at t-1 and t
  single_previous_only  // everything muted except one modality at t-1
};

inline constexpr AugmentationKind kAllAugmentations[] = {
    AugmentationKind::original, AugmentationKind::current_muted,
    AugmentationKind::modality_muted, AugmentationKind::single_previous_only};

struct AugmentedBatch {
  Eigen::MatrixXd inputs;   // masked
  Eigen::MatrixXd targets;  // fully observed
  std::vector<MaskSpec> masks;
  std::vector<AugmentationKind> kinds;
  std::vector<std::size_t> sample_index;
  std::vector<std::size_t> modality;  // round-robin modality, where applicable

  std::size_t size() const { return masks.size(); }
};

/// Modality used by the round-robin augmentation types for sample i.
inline std::size_t round_robin_modality(std::size_t sample, std::int64_t epoch,
                                        std::size_t modalities) {
  return (sample + static_cast<std::size_t>(epoch)) % modalities;
}

inline MaskSpec augmentation_mask(AugmentationKind kind, std::size_t modality,
                                  std::size_t modalities) {
  switch (kind) {
    case AugmentationKind::original: return MaskSpec::none(modalities);
    case AugmentationKind::current_muted:
      return MaskSpec::timestep(modalities, Timestep::current);
    case AugmentationKind::modality_muted:
      return MaskSpec::modality(modalities, modality);
    case AugmentationKind::single_previous_only:
      return MaskSpec::all_except(modalities, modality, Timestep::previous);
  }
  return MaskSpec::none(modalities);
}

/// One epoch of training pairs: four per sample (original plus three muted
/// variants), in an order shuffled by `rng`. The round-robin modality of
/// sample i in epoch e is (i + e) mod modality_count.
inline AugmentedBatch augment(const Dataset& ds, std::int64_t epoch, Rng& rng) {
  const std::size_t n = ds.size();
  const std::size_t modalities = ds.layout.modality_count();
  std::vector<std::size_t> order(4 * n);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());

  AugmentedBatch out;
  out.inputs.resize(ds.targets.rows(), static_cast<Eigen::Index>(4 * n));
  out.targets.resize(ds.targets.rows(), static_cast<Eigen::Index>(4 * n));
  out.masks.reserve(4 * n);
  for (std::size_t j = 0; j < order.size(); ++j) {
    const std::size_t sample = order[j] / 4;
    const auto kind = kAllAugmentations[order[j] % 4];
    const std::size_t modality = round_robin_modality(sample, epoch, modalities);
    const auto col = static_cast<Eigen::Index>(j);
    out.targets.col(col) = ds.targets.col(static_cast<Eigen::Index>(sample));
    out.inputs.col(col) = out.targets.col(col);
    auto mask = augmentation_mask(kind, modality, modalities);
    apply_mask_inplace(out.inputs.col(col), mask, ds.layout);
    out.masks.push_back(std::move(mask));
    out.kinds.push_back(kind);
    out.sample_index.push_back(sample);
    out.modality.push_back(modality);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_real(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

/// Writes raw (unnormalized) samples with the layout's column header.
inline void write_dataset_csv(std::ostream& os, const Eigen::MatrixXd& raw,
                              const ModalityLayout& layout) {
  const auto names = layout.column_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    os << (i ? "," : "") << names[i];
  os << '\n';
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
      os << (i ? "," : "") << format_real(raw(i, j));
    os << '\n';
  }
}

/// Parses a dataset CSV into raw samples (dims x rows). The header must name
/// the layout's columns in order; every row must carry every field.
inline Eigen::MatrixXd read_dataset_csv(std::istream& is,
                                        const ModalityLayout& layout) {
  const auto expected = layout.column_names();
  std::string line;
  if (!std::getline(is, line)) throw IngestionError("empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  {
    std::vector<std::string> header;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
    if (header != expected)
      throw IngestionError("dataset header does not match layout (expected " +
                           std::to_string(expected.size()) +
                           " columns starting with " + expected.front() + ")");
  }
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t fields = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(p, comma, v);
      if (p == comma || ec != std::errc{} || ptr != comma)
        throw IngestionError("line " + std::to_string(line_no) + ", field " +
                             std::to_string(fields + 1) +
                             ": missing or malformed value");
      values.push_back(v);
      ++fields;
      if (comma == end) break;
      p = comma + 1;
    }
    if (fields != expected.size())
      throw IngestionError("line " + std::to_string(line_no) + " has " +
                           std::to_string(fields) + " fields, expected " +
                           std::to_string(expected.size()));
    ++rows;
  }
  if (rows == 0) throw IngestionError("dataset file has no rows");
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(expected.size()),
                      static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < expected.size(); ++c)
      raw(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) =
          values[r * expected.size() + c];
  return raw;
}

inline Dataset load_dataset_csv(const std::string& path,
                                const ModalityLayout& layout =
                                    ModalityLayout::standard()) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open dataset '" + path + "'");
  return normalize(read_dataset_csv(in, layout), layout, "csv(" + path + ")");
}

}  // namespace mmvae
