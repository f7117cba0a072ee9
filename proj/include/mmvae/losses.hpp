#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "gaussian.hpp"
#include "layout.hpp"
#include "model.hpp"
#include "nn.hpp"

namespace mmvae {

struct LossBreakdown {
  double reconstruction_loss = 0.0;
  double latent_loss = 0.0;
  double beta = 0.0;
  double total = 0.0;
};

/// Per-coordinate reconstruction weight 1 / (2 * dim(M)): each modality
/// contributes the mean over its own coordinates.
inline Eigen::VectorXd reconstruction_weights(const ModalityLayout& layout) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(layout.total_dim()));
  for (std::size_t m = 0; m < layout.modality_count(); ++m)
    w.segment(static_cast<Eigen::Index>(layout.offset(m)),
              static_cast<Eigen::Index>(layout.width(m)))
        .setConstant(1.0 / static_cast<double>(layout.width(m)));
  return w;
}

/// Negative dimensionality-weighted log-likelihood of the full target.
inline double reconstruction_loss(const DiagonalGaussian& g,
                                  const Eigen::VectorXd& target,
                                  const ModalityLayout& layout) {
  if (target.size() != g.dim() ||
      target.size() != static_cast<Eigen::Index>(layout.total_dim()))
    throw UsageError("dimension mismatch in reconstruction loss");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const auto w = reconstruction_weights(layout);
  const auto& var = g.variance().array();
  const Eigen::ArrayXd log_density =
      -half_log_2pi - 0.5 * var.log() -
      (target.array() - g.mean().array()).square() / (2.0 * var);
  return -(w.array() * log_density).sum();
}

/// KL(N(mean, exp(log_variance)) || N(0, I)).
inline double latent_kl_to_prior(const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& log_variance) {
  if (mean.size() != log_variance.size())
    throw UsageError("latent mean and log-variance lengths differ");
  return 0.5 * (mean.array().square() + log_variance.array().exp() - 1.0 -
                log_variance.array())
                   .sum();
}

/// Batch ELBO loss with a fixed reparameterization noise matrix (latent x
/// batch). Values are means over the batch. When `accumulate_gradients` is
/// set, d(total)/d(parameter) is added to the model's gradient buffer.
///
/// The two latent heads and the five first decoder layers are evaluated as
/// single stacked products (the decoder layers all read z).
inline LossBreakdown elbo_loss(MultimodalVae& model,
                               const Eigen::MatrixXd& x_input,
                               const Eigen::MatrixXd& x_target, double beta,
                               const Eigen::MatrixXd& epsilon,
                               bool accumulate_gradients = true,
                               long epoch = -1) {
  using Eigen::ArrayXXd;
  using Eigen::Index;
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const auto& layout = model.layout();
  auto& params = model.parameters();
  const Index n = model.input_dim();
  const Index batch = x_input.cols();
  if (batch == 0) throw UsageError("empty batch");
  if (x_input.rows() != n || x_target.rows() != n || x_target.cols() != batch ||
      epsilon.rows() != n || epsilon.cols() != batch)
    throw UsageError("elbo_loss: input, target and noise shapes disagree");
  if (!(beta >= 0.0)) throw UsageError("beta must be non-negative");
  if (!x_input.allFinite()) throw InputError("non-finite model input");

  const std::size_t modalities = layout.modality_count();
  const auto h = static_cast<Index>(model.hidden_width());
  const Index stacked = h * static_cast<Index>(modalities);
  auto off = [&](std::size_t m) { return static_cast<Index>(layout.offset(m)); };
  auto width = [&](std::size_t m) { return static_cast<Index>(layout.width(m)); };
  auto rows = [&](std::size_t m) { return static_cast<Index>(m) * h; };

  // Encoders.
  MatrixXd features(stacked, batch);
  for (std::size_t m = 0; m < modalities; ++m) {
    const auto& e = params.layer(model.encoder_id(m));
    features.middleRows(rows(m), h).noalias() =
        e.weights * x_input.middleRows(off(m), width(m));
    features.middleRows(rows(m), h).colwise() += e.biases;
  }
  detail::fast_tanh(features);

  // Latent heads: rows [0, n) mean, [n, 2n) raw log-variance.
  const auto& head_mean = params.layer(model.latent_mean_id());
  const auto& head_lv = params.layer(model.latent_log_variance_id());
  MatrixXd head_w(2 * n, stacked);
  head_w << head_mean.weights, head_lv.weights;
  MatrixXd heads(2 * n, batch);
  heads.noalias() = head_w * features;
  heads.topRows(n).colwise() += head_mean.biases;
  heads.bottomRows(n).colwise() += head_lv.biases;
  const auto mu = heads.topRows(n);
  const auto raw_lv = heads.bottomRows(n);
  const ArrayXXd lv = raw_lv.array().max(kLogVarianceMin).min(kLogVarianceMax);
  const ArrayXXd var = lv.exp();
  const ArrayXXd std_dev = var.sqrt();
  const MatrixXd z = mu + (std_dev * epsilon.array()).matrix();

  // First decoder layers, stacked.
  MatrixXd dec_w(stacked, n);
  VectorXd dec_b(stacked);
  for (std::size_t m = 0; m < modalities; ++m) {
    const auto& d = params.layer(model.decoder_hidden_id(m));
    dec_w.middleRows(rows(m), h) = d.weights;
    dec_b.segment(rows(m), h) = d.biases;
  }
  MatrixXd hidden(stacked, batch);
  hidden.noalias() = dec_w * z;
  hidden.colwise() += dec_b;
  detail::fast_tanh(hidden);

  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const double inv_batch = 1.0 / static_cast<double>(batch);

  double rec_sum = 0.0;
  MatrixXd grad_hidden(accumulate_gradients ? stacked : 0, batch);
  for (std::size_t m = 0; m < modalities; ++m) {
    const auto& o = params.layer(model.decoder_output_id(m));
    const Index w = width(m);
    const double weight = 1.0 / static_cast<double>(w);
    MatrixXd out(2 * w, batch);
    out.noalias() = o.weights * hidden.middleRows(rows(m), h);
    out.colwise() += o.biases;
    const auto raw = out.bottomRows(w).array();
    const ArrayXXd dlv = raw.max(kLogVarianceMin).min(kLogVarianceMax);
    const ArrayXXd inv_var = (-dlv).exp();
    const ArrayXXd resid = x_target.middleRows(off(m), w).array() - out.topRows(w).array();
    const ArrayXXd scaled = resid * inv_var;
    const ArrayXXd sq = resid * scaled;
    rec_sum += weight * (half_log_2pi * static_cast<double>(w * batch) +
                         0.5 * dlv.sum() + 0.5 * sq.sum());
    if (!accumulate_gradients) continue;
    MatrixXd grad_out(2 * w, batch);
    grad_out.topRows(w) = (-weight * inv_batch) * scaled.matrix();
    grad_out.bottomRows(w) =
        ((weight * inv_batch * 0.5) * (1.0 - sq) *
         (raw > kLogVarianceMin && raw < kLogVarianceMax).cast<double>())
            .matrix();
    auto& g = params.gradient(model.decoder_output_id(m));
    g.weights.noalias() += grad_out * hidden.middleRows(rows(m), h).transpose();
    g.biases += grad_out.rowwise().sum();
    grad_hidden.middleRows(rows(m), h).noalias() = o.weights.transpose() * grad_out;
  }

  const double kl_sum = 0.5 * (mu.array().square() + var - 1.0 - lv).sum();

  LossBreakdown result;
  result.reconstruction_loss = rec_sum * inv_batch;
  result.latent_loss = kl_sum * inv_batch;
  result.beta = beta;
  result.total = result.reconstruction_loss + beta * result.latent_loss;
  if (!std::isfinite(result.total)) {
    long bad = 0;
    for (Index j = 0; j < batch; ++j)
      if (!z.col(j).allFinite() || !hidden.col(j).allFinite()) {
        bad = static_cast<long>(j);
        break;
      }
    throw TrainingError("non-finite loss", epoch, bad);
  }
  if (!accumulate_gradients) return result;

  // Back through the first decoder layers.
  grad_hidden.array() *= 1.0 - hidden.array().square();
  MatrixXd g_dec(stacked, n);
  g_dec.noalias() = grad_hidden * z.transpose();
  const VectorXd g_dec_b = grad_hidden.rowwise().sum();
  for (std::size_t m = 0; m < modalities; ++m) {
    auto& g = params.gradient(model.decoder_hidden_id(m));
    g.weights += g_dec.middleRows(rows(m), h);
    g.biases += g_dec_b.segment(rows(m), h);
  }
  MatrixXd grad_z(n, batch);
  grad_z.noalias() = dec_w.transpose() * grad_hidden;

  // Reparameterization and prior KL.
  MatrixXd grad_heads(2 * n, batch);
  grad_heads.topRows(n) = grad_z + (beta * inv_batch) * mu;
  grad_heads.bottomRows(n) =
      ((0.5 * grad_z.array() * epsilon.array() * std_dev +
        (beta * inv_batch * 0.5) * (var - 1.0)) *
       (raw_lv.array() > kLogVarianceMin && raw_lv.array() < kLogVarianceMax)
           .cast<double>())
          .matrix();
  MatrixXd g_heads(2 * n, stacked);
  g_heads.noalias() = grad_heads * features.transpose();
  {
    auto& gm = params.gradient(model.latent_mean_id());
    gm.weights += g_heads.topRows(n);
    gm.biases += grad_heads.topRows(n).rowwise().sum();
    auto& gl = params.gradient(model.latent_log_variance_id());
    gl.weights += g_heads.bottomRows(n);
    gl.biases += grad_heads.bottomRows(n).rowwise().sum();
  }

  // Encoders.
  MatrixXd grad_features(stacked, batch);
  grad_features.noalias() = head_w.transpose() * grad_heads;
  grad_features.array() *= 1.0 - features.array().square();
  for (std::size_t m = 0; m < modalities; ++m) {
    auto& g = params.gradient(model.encoder_id(m));
    g.weights.noalias() += grad_features.middleRows(rows(m), h) *
                           x_input.middleRows(off(m), width(m)).transpose();
    g.biases += grad_features.middleRows(rows(m), h).rowwise().sum();
  }
  return result;
}

/// Same as above with fresh noise drawn from `rng` (one sample per column).
inline LossBreakdown elbo_loss(MultimodalVae& model,
                               const Eigen::MatrixXd& x_input,
                               const Eigen::MatrixXd& x_target, double beta,
                               Rng& rng, bool accumulate_gradients = true,
                               long epoch = -1) {
  const Eigen::MatrixXd eps =
      rng.gaussian_matrix(model.latent_dim(), x_input.cols());
  return elbo_loss(model, x_input, x_target, beta, eps, accumulate_gradients,
                   epoch);
}

}  // namespace mmvae
