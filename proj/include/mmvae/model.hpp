#pragma once

// Multimodal VAE: one encoder per modality, a shared integration point that
// maps the concatenated encoder features to the latent mean and log-variance,
// and one decoder per modality reading the whole latent.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gaussian.hpp"
#include "layout.hpp"
#include "nn.hpp"
#include "rng.hpp"

namespace mmvae {

inline constexpr std::size_t kDefaultHiddenWidth = 32;

enum class LatentMode { sample, mean };

struct LatentCode {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_variance;  // clamped to [-10, 10]
  Eigen::VectorXd epsilon;       // empty until reparameterized
  Eigen::VectorXd sample;        // mean + exp(log_variance / 2) * epsilon
};

/// Batched latent/decoder outputs, one sample per column. Log-variances are
/// clamped; `raw_*` keeps the pre-clamp head output for gradient masking.
struct GaussianBatch {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd log_variance;
  Eigen::MatrixXd raw_log_variance;

  DiagonalGaussian column(Eigen::Index j) const {
    return DiagonalGaussian::from_log_variance(mean.col(j),
                                               log_variance.col(j));
  }
};

inline Eigen::MatrixXd clamp_log_variance(const Eigen::MatrixXd& raw) {
  return raw.array().max(kLogVarianceMin).min(kLogVarianceMax).matrix();
}

class MultimodalVae {
 public:
  MultimodalVae(ModalityLayout layout, std::size_t hidden_width, Rng& init)
      : layout_(std::move(layout)), hidden_(hidden_width) {
    if (hidden_ == 0) throw ConfigurationError("hidden width must be positive");
    const auto n = static_cast<Eigen::Index>(layout_.total_dim());
    const auto h = static_cast<Eigen::Index>(hidden_);
    const auto modalities = layout_.modality_count();
    for (std::size_t m = 0; m < modalities; ++m) {
      const auto w = static_cast<Eigen::Index>(layout_.width(m));
      encoder_.push_back(params_.add(
          "encoder/" + layout_.modality(m).name + "/0",
          DenseLayer::glorot(w, h, Activation::tanh, init)));
    }
    const auto features = h * static_cast<Eigen::Index>(modalities);
    latent_mean_ = params_.add(
        "latent/mean", DenseLayer::glorot(features, n, Activation::identity, init));
    latent_log_variance_ = params_.add(
        "latent/log_variance",
        DenseLayer::glorot(features, n, Activation::identity, init));
    for (std::size_t m = 0; m < modalities; ++m) {
      const auto w = static_cast<Eigen::Index>(layout_.width(m));
      const auto& name = layout_.modality(m).name;
      decoder_hidden_.push_back(params_.add(
          "decoder/" + name + "/0",
          DenseLayer::glorot(n, h, Activation::tanh, init)));
      // Rows [0, w) are the mean, rows [w, 2w) the log-variance.
      decoder_output_.push_back(params_.add(
          "decoder/" + name + "/1",
          DenseLayer::glorot(h, 2 * w, Activation::identity, init)));
    }
  }

  const ModalityLayout& layout() const { return layout_; }
  std::size_t hidden_width() const { return hidden_; }
  Eigen::Index input_dim() const {
    return static_cast<Eigen::Index>(layout_.total_dim());
  }
  Eigen::Index latent_dim() const { return input_dim(); }

  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  ParameterSet::Id encoder_id(std::size_t m) const { return encoder_.at(m); }
  ParameterSet::Id decoder_hidden_id(std::size_t m) const {
    return decoder_hidden_.at(m);
  }
  ParameterSet::Id decoder_output_id(std::size_t m) const {
    return decoder_output_.at(m);
  }
  ParameterSet::Id latent_mean_id() const { return latent_mean_; }
  ParameterSet::Id latent_log_variance_id() const {
    return latent_log_variance_;
  }

  /// Concatenated per-modality encoder features (hidden * modalities rows).
  Eigen::MatrixXd encoder_features(const Eigen::MatrixXd& x) const {
    check_input(x);
    const auto h = static_cast<Eigen::Index>(hidden_);
    Eigen::MatrixXd features(h * static_cast<Eigen::Index>(encoder_.size()),
                             x.cols());
    for (std::size_t m = 0; m < encoder_.size(); ++m) {
      const auto& layer = params_.layer(encoder_[m]);
      features.middleRows(static_cast<Eigen::Index>(m) * h, h) =
          detail::affine(layer, slice(x, m));
    }
    return features;
  }

  GaussianBatch encode(const Eigen::MatrixXd& x) const {
    const auto features = encoder_features(x);
    GaussianBatch out;
    out.mean = detail::affine(params_.layer(latent_mean_), features);
    out.raw_log_variance =
        detail::affine(params_.layer(latent_log_variance_), features);
    out.log_variance = clamp_log_variance(out.raw_log_variance);
    return out;
  }

  LatentCode encode(const Eigen::VectorXd& x) const {
    auto batch = encode(Eigen::MatrixXd(x));
    return {batch.mean.col(0), batch.log_variance.col(0), {}, {}};
  }

  GaussianBatch decode(const Eigen::MatrixXd& z) const {
    if (z.rows() != latent_dim())
      throw UsageError("latent has " + std::to_string(z.rows()) +
                       " rows, expected " + std::to_string(latent_dim()));
    if (!z.allFinite()) throw InputError("non-finite latent");
    GaussianBatch out;
    out.mean.resize(input_dim(), z.cols());
    out.raw_log_variance.resize(input_dim(), z.cols());
    for (std::size_t m = 0; m < decoder_hidden_.size(); ++m) {
      const auto hidden = detail::affine(params_.layer(decoder_hidden_[m]), z);
      const auto head = detail::affine(params_.layer(decoder_output_[m]), hidden);
      const auto off = static_cast<Eigen::Index>(layout_.offset(m));
      const auto w = static_cast<Eigen::Index>(layout_.width(m));
      out.mean.middleRows(off, w) = head.topRows(w);
      out.raw_log_variance.middleRows(off, w) = head.bottomRows(w);
    }
    out.log_variance = clamp_log_variance(out.raw_log_variance);
    return out;
  }

  DiagonalGaussian decode(const Eigen::VectorXd& z) const {
    return decode(Eigen::MatrixXd(z)).column(0);
  }

  /// Runs only modality m's decoder stack; returns its 2*dim(m) slice.
  DiagonalGaussian decode_modality(std::size_t m, const Eigen::VectorXd& z) const {
    const std::vector<DenseLayer> stack{params_.layer(decoder_hidden_.at(m)),
                                        params_.layer(decoder_output_.at(m))};
    const Eigen::VectorXd head = evaluate(stack, z);
    const auto w = static_cast<Eigen::Index>(layout_.width(m));
    return DiagonalGaussian::from_log_variance(head.head(w), head.tail(w));
  }

  /// encode, then take the latent mean or a reparameterized sample, then decode.
  GaussianBatch reconstruct(const Eigen::MatrixXd& x, Rng& rng,
                            LatentMode mode) const {
    const auto code = encode(x);
    if (mode == LatentMode::mean) return decode(code.mean);
    const Eigen::MatrixXd eps = rng.gaussian_matrix(code.mean.rows(), x.cols());
    return decode(reparameterize(code.mean, code.log_variance, eps));
  }

  GaussianBatch reconstruct_mean(const Eigen::MatrixXd& x) const {
    return decode(encode(x).mean);
  }

  DiagonalGaussian reconstruct(const Eigen::VectorXd& x, Rng& rng,
                               LatentMode mode) const {
    return reconstruct(Eigen::MatrixXd(x), rng, mode).column(0);
  }

  static Eigen::MatrixXd reparameterize(const Eigen::MatrixXd& mean,
                                        const Eigen::MatrixXd& log_variance,
                                        const Eigen::MatrixXd& epsilon) {
    return mean + ((0.5 * log_variance.array()).exp() * epsilon.array()).matrix();
  }

  Eigen::MatrixXd slice(const Eigen::MatrixXd& x, std::size_t m) const {
    return x.middleRows(static_cast<Eigen::Index>(layout_.offset(m)),
                        static_cast<Eigen::Index>(layout_.width(m)));
  }

 private:
  void check_input(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_dim())
      throw UsageError("input has " + std::to_string(x.rows()) +
                       " rows, expected " + std::to_string(input_dim()));
    if (!x.allFinite()) throw InputError("non-finite model input");
  }

  ModalityLayout layout_;
  std::size_t hidden_;
  ParameterSet params_;
  std::vector<ParameterSet::Id> encoder_;
  ParameterSet::Id latent_mean_ = 0;
  ParameterSet::Id latent_log_variance_ = 0;
  std::vector<ParameterSet::Id> decoder_hidden_;
  std::vector<ParameterSet::Id> decoder_output_;
};

/// Draws fresh standard-normal noise and fills in sample/epsilon.
inline LatentCode reparameterize(LatentCode code, Rng& rng) {
  code.epsilon = rng.gaussian_vector(code.mean.size());
  code.sample = code.mean.array() +
                (0.5 * code.log_variance.array()).exp() * code.epsilon.array();
  return code;
}

}  // namespace mmvae
