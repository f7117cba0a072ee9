#pragma once

// Multimodal integration measures. Every measure is an average over an
// evaluation set of KL(p || q), where p is the reconstruction from the full
// input and q the reconstruction from a muted input. Both sides decode the
// latent mean, so the values are deterministic for a fixed model.
//
//   single-modality error (Delta): q sees only modality M at t-1
//   loss of precision     (delta): q has modality M muted at t-1 and t
//   baseline                     : q sees nothing
//
// Scope `modality` sums the KL over I(M) (both timesteps of M), scope `all`
// over every coordinate.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "data.hpp"
#include "errors.hpp"
#include "gaussian.hpp"
#include "model.hpp"

namespace mmvae {

inline constexpr std::size_t kDefaultEvalSetSize = 1024;

enum class MeasureFamily { single_modality_error, loss_of_precision, baseline };
enum class MeasureScope { modality, all };

inline std::string_view to_string(MeasureFamily f) {
  switch (f) {
    case MeasureFamily::single_modality_error: return "single_modality_error";
    case MeasureFamily::loss_of_precision: return "loss_of_precision";
    case MeasureFamily::baseline: return "baseline";
  }
  return "?";
}

inline std::string_view to_string(MeasureScope s) {
  return s == MeasureScope::modality ? "modality" : "all";
}

struct MeasureKind {
  MeasureFamily family = MeasureFamily::baseline;
  MeasureScope scope = MeasureScope::all;
  std::optional<std::size_t> modality;

  static MeasureKind baseline() { return {}; }
  static MeasureKind single_modality_error(std::size_t m, MeasureScope s) {
    return {MeasureFamily::single_modality_error, s, m};
  }
  static MeasureKind loss_of_precision(std::size_t m, MeasureScope s) {
    return {MeasureFamily::loss_of_precision, s, m};
  }

  void validate(const ModalityLayout& layout) const {
    if (family == MeasureFamily::baseline) {
      if (modality || scope != MeasureScope::all)
        throw UsageError("baseline has no modality and scope 'all'");
      return;
    }
    if (!modality || *modality >= layout.modality_count())
      throw UsageError("measure needs a valid modality");
  }
};

/// Muting pattern that produces the q side of a measure.
inline MaskSpec q_side_mask(const MeasureKind& kind, const ModalityLayout& layout) {
  kind.validate(layout);
  const auto n = layout.modality_count();
  switch (kind.family) {
    case MeasureFamily::single_modality_error:
      return MaskSpec::all_except(n, *kind.modality, Timestep::previous);
    case MeasureFamily::loss_of_precision:
      return MaskSpec::modality(n, *kind.modality);
    case MeasureFamily::baseline:
      return MaskSpec::all(n);
  }
  return MaskSpec::all(n);
}

inline std::vector<std::size_t> scope_indices(const MeasureKind& kind,
                                              const ModalityLayout& layout) {
  if (kind.scope == MeasureScope::modality) return layout.indices(*kind.modality);
  return layout.all_indices();
}

namespace measure_detail {

/// Per-coordinate KL terms, coordinates x samples.
inline Eigen::ArrayXXd kl_terms(const GaussianBatch& p, const GaussianBatch& q) {
  const Eigen::ArrayXXd pv = p.log_variance.array().exp();
  const Eigen::ArrayXXd qv = q.log_variance.array().exp();
  return 0.5 * ((q.log_variance - p.log_variance).array() - 1.0 + pv / qv +
                (q.mean - p.mean).array().square() / qv);
}

inline void check_eval_set(const MultimodalVae& model, const Dataset& eval_set,
                           std::size_t expected_size) {
  if (eval_set.size() != expected_size)
    throw UsageError("evaluation set has " + std::to_string(eval_set.size()) +
                     " samples, expected " + std::to_string(expected_size));
  if (!(eval_set.layout == model.layout()))
    throw UsageError("evaluation set layout differs from model layout");
}

inline double average_over(const Eigen::ArrayXXd& terms,
                           const std::vector<std::size_t>& indices) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < terms.cols(); ++j) {
    double s = 0.0;
    for (auto i : indices) s += terms(static_cast<Eigen::Index>(i), j);
    total += s;
  }
  return total / static_cast<double>(terms.cols());
}

}  // namespace measure_detail

/// Average KL(p || q) over the evaluation set for one measure.
inline double measure(const MultimodalVae& model, const Dataset& eval_set,
                      const MeasureKind& kind,
                      std::size_t expected_size = kDefaultEvalSetSize) {
  measure_detail::check_eval_set(model, eval_set, expected_size);
  const auto& layout = model.layout();
  const auto mask = q_side_mask(kind, layout);
  const auto p = model.reconstruct_mean(eval_set.targets);
  const auto q = model.reconstruct_mean(apply_mask(eval_set.targets, mask, layout));
  return measure_detail::average_over(measure_detail::kl_terms(p, q),
                                      scope_indices(kind, layout));
}

inline double baseline(const MultimodalVae& model, const Dataset& eval_set,
                       std::size_t expected_size = kDefaultEvalSetSize) {
  return measure(model, eval_set, MeasureKind::baseline(), expected_size);
}

/// Mean Euclidean distance between each sample and the mean of its
/// full-input reconstruction.
inline double prediction_error(const MultimodalVae& model,
                               const Dataset& eval_set) {
  if (eval_set.size() == 0) throw UsageError("empty evaluation set");
  const auto p = model.reconstruct_mean(eval_set.targets);
  double total = 0.0;
  for (Eigen::Index j = 0; j < p.mean.cols(); ++j)
    total += (eval_set.targets.col(j) - p.mean.col(j)).norm();
  return total / static_cast<double>(p.mean.cols());
}

struct MeasureReport {
  std::int64_t epoch = 0;
  std::vector<double> single_modality_error_modality;  // Delta_M(M)
  std::vector<double> single_modality_error_all;       // Delta_all(M)
  std::vector<double> loss_of_precision_modality;      // delta_M(M)
  std::vector<double> loss_of_precision_all;           // delta_all(M)
  double baseline = 0.0;
  double prediction_error = 0.0;
  std::size_t eval_set_size = kDefaultEvalSetSize;

  double value(const MeasureKind& k) const {
    if (k.family == MeasureFamily::baseline) return baseline;
    const auto m = *k.modality;
    if (k.family == MeasureFamily::single_modality_error)
      return k.scope == MeasureScope::modality
                 ? single_modality_error_modality.at(m)
                 : single_modality_error_all.at(m);
    return k.scope == MeasureScope::modality ? loss_of_precision_modality.at(m)
                                             : loss_of_precision_all.at(m);
  }
};

/// All 4 x modalities measures, the baseline and the prediction error from
/// one pass of reconstructions.
inline MeasureReport evaluate_measures(
    const MultimodalVae& model, const Dataset& eval_set, std::int64_t epoch,
    std::size_t expected_size = kDefaultEvalSetSize) {
  measure_detail::check_eval_set(model, eval_set, expected_size);
  const auto& layout = model.layout();
  const auto modalities = layout.modality_count();
  const auto p = model.reconstruct_mean(eval_set.targets);
  const auto all = layout.all_indices();

  MeasureReport r;
  r.epoch = epoch;
  r.eval_set_size = eval_set.size();
  auto run = [&](const MaskSpec& mask) {
    const auto q =
        model.reconstruct_mean(apply_mask(eval_set.targets, mask, layout));
    return measure_detail::kl_terms(p, q);
  };
  for (std::size_t m = 0; m < modalities; ++m) {
    const auto own = layout.indices(m);
    const auto single = run(q_side_mask(
        MeasureKind::single_modality_error(m, MeasureScope::all), layout));
    r.single_modality_error_modality.push_back(
        measure_detail::average_over(single, own));
    r.single_modality_error_all.push_back(
        measure_detail::average_over(single, all));
    const auto lop = run(q_side_mask(
        MeasureKind::loss_of_precision(m, MeasureScope::all), layout));
    r.loss_of_precision_modality.push_back(
        measure_detail::average_over(lop, own));
    r.loss_of_precision_all.push_back(measure_detail::average_over(lop, all));
  }
  r.baseline = measure_detail::average_over(
      run(q_side_mask(MeasureKind::baseline(), layout)), all);
  double pe = 0.0;
  for (Eigen::Index j = 0; j < p.mean.cols(); ++j)
    pe += (eval_set.targets.col(j) - p.mean.col(j)).norm();
  r.prediction_error = pe / static_cast<double>(p.mean.cols());
  return r;
}

}  // namespace mmvae
