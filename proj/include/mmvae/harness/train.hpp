#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "../checkpoint.hpp"
#include "../data.hpp"
#include "../losses.hpp"
#include "../measures.hpp"
#include "../model.hpp"
#include "../nn.hpp"
#include "../rng.hpp"
#include "../schedules.hpp"
#include "../synthetic.hpp"
#include "config.hpp"

namespace mmvae {

/// Training set plus the fixed evaluation set used for every measure.
struct DataBundle {
  Dataset train;
  Dataset eval;
};

inline Dataset renormalize(const Eigen::MatrixXd& raw, const Dataset& like,
                           std::string provenance) {
  Dataset out{like.layout, like.stats.apply(raw), like.stats,
              std::move(provenance)};
  out.targets = out.targets.array().max(-1.0).min(1.0).matrix();
  return out;
}

inline DataBundle load_data(const RunConfig& c) {
  const auto& layout = ModalityLayout::standard();
  const auto& d = c.dataset;
  DataBundle b;
  if (d.source == "csv") {
    Eigen::MatrixXd raw;
    {
      std::ifstream in(d.path);
      if (!in) throw IngestionError("cannot open dataset '" + d.path + "'");
      raw = read_dataset_csv(in, layout);
    }
    if (c.eval_source == EvalSource::heldout) {
      const auto e = static_cast<Eigen::Index>(c.eval_set_size);
      if (raw.cols() <= e)
        throw ConfigurationError("dataset too small for a held-out evaluation set");
      b.train = normalize(raw.leftCols(raw.cols() - e), layout, "csv:" + d.path);
      b.eval = renormalize(raw.rightCols(e), b.train, "csv:" + d.path + " (held out)");
      return b;
    }
    b.train = normalize(raw, layout, "csv:" + d.path);
  } else {
    b.train = generate_synthetic(d.seed, d.n_samples, d.synthetic);
    if (c.eval_source == EvalSource::heldout) {
      const auto seed = derive_seed(d.seed, 0x4e4f);
      b.eval = renormalize(generate_synthetic_raw(seed, c.eval_set_size, d.synthetic),
                           b.train, describe(d.synthetic, seed, c.eval_set_size));
      return b;
    }
  }
  if (b.train.size() < c.eval_set_size)
    throw ConfigurationError("eval_set_size exceeds the number of training samples");
  std::vector<std::size_t> idx(b.train.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng pick(c.eval_seed);
  pick.shuffle(idx.begin(), idx.end());
  idx.resize(c.eval_set_size);
  std::sort(idx.begin(), idx.end());
  b.eval = b.train.subset(idx);
  return b;
}

inline std::string dataset_fingerprint(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (Eigen::Index k = 0; k < ds.targets.size(); ++k) {
    const auto bits = std::bit_cast<std::uint64_t>(ds.targets.data()[k]);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(&bits), 8), h);
  }
  return hex64(h);
}

struct MetricRow {
  std::int64_t epoch = 0;
  double beta = 0.0;
  double reconstruction_loss = 0.0;
  double latent_loss = 0.0;
  double total_loss = 0.0;
  double prediction_error = 0.0;
};

struct RunResult {
  std::uint64_t run_seed = 0;
  bool failed = false;
  std::string error;
  std::vector<MetricRow> metrics;
  std::vector<MeasureReport> measures;
};

/// Single-run trainer. Epochs are indexed from 0; an evaluation is labelled
/// with the number of epochs completed.
class Trainer {
 public:
  Trainer(const RunConfig& config, std::uint64_t run_seed)
      : config_(config),
        schedule_(config.beta_schedule()),
        init_rng_(derive_seed(run_seed, 0)),
        model_(ModalityLayout::standard(), config.hidden_width, init_rng_),
        optimizer_(model_.parameters(), config.optimizer),
        rng_(derive_seed(run_seed, 1)) {}

  MultimodalVae& model() { return model_; }
  const MultimodalVae& model() const { return model_; }
  const Rng& rng() const { return rng_; }
  const BetaSchedule& schedule() const { return schedule_; }

  /// One pass over the augmented training set; returns sample-weighted means.
  LossBreakdown run_epoch(const Dataset& train, std::int64_t epoch) {
    const double beta = schedule_.beta_at(epoch);
    const auto batch = augment(train, epoch, rng_);
    const Eigen::Index total = batch.inputs.cols();
    const auto bs = static_cast<Eigen::Index>(config_.batch_size);
    LossBreakdown sum{0.0, 0.0, beta, 0.0};
    for (Eigen::Index start = 0; start < total; start += bs) {
      const Eigen::Index n = std::min(bs, total - start);
      const Eigen::MatrixXd in = batch.inputs.middleCols(start, n);
      const Eigen::MatrixXd tg = batch.targets.middleCols(start, n);
      const auto l = elbo_loss(model_, in, tg, beta, rng_, true, epoch);
      optimizer_.step(model_.parameters(), epoch);
      const auto w = static_cast<double>(n);
      sum.reconstruction_loss += w * l.reconstruction_loss;
      sum.latent_loss += w * l.latent_loss;
      sum.total += w * l.total;
    }
    const auto t = static_cast<double>(total);
    sum.reconstruction_loss /= t;
    sum.latent_loss /= t;
    sum.total /= t;
    return sum;
  }

 private:
  RunConfig config_;
  BetaSchedule schedule_;
  Rng init_rng_;
  MultimodalVae model_;
  Adam optimizer_;
  Rng rng_;
};

/// Callback receiving each evaluation as it happens.
using EvalObserver = std::function<void(const MetricRow&, const MeasureReport&)>;

/// Trains one run for config.total_epochs, evaluating every eval_every epochs.
/// Checkpoints go to `checkpoint_dir` (if non-empty) as epoch_<n>.ckpt.
inline RunResult train_run(const RunConfig& config, std::uint64_t run_seed,
                           const DataBundle& data,
                           const std::filesystem::path& checkpoint_dir = {},
                           const EvalObserver& observer = {}) {
  RunResult r;
  r.run_seed = run_seed;
  try {
    Trainer trainer(config, run_seed);
    for (std::int64_t epoch = 0; epoch < config.total_epochs; ++epoch) {
      const auto l = trainer.run_epoch(data.train, epoch);
      const std::int64_t done = epoch + 1;
      if (done % config.eval_every == 0) {
        auto rep = evaluate_measures(trainer.model(), data.eval, done,
                                     config.eval_set_size);
        MetricRow row{done, l.beta, l.reconstruction_loss, l.latent_loss,
                      l.total, rep.prediction_error};
        if (observer) observer(row, rep);
        r.metrics.push_back(row);
        r.measures.push_back(std::move(rep));
      }
      const bool ckpt = done == config.total_epochs ||
                        (config.checkpoint_every > 0 &&
                         done % config.checkpoint_every == 0);
      if (ckpt && !checkpoint_dir.empty())
        save_checkpoint(checkpoint_dir / ("epoch_" + std::to_string(done) + ".ckpt"),
                        trainer.model(), done, trainer.rng());
    }
  } catch (const TrainingError& e) {
    r.failed = true;
    r.error = e.what();
  } catch (const InputError& e) {
    r.failed = true;
    r.error = e.what();
  }
  return r;
}

}  // namespace mmvae
