#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"

namespace mmvae {

inline constexpr double kLogVarianceMin = -10.0;
inline constexpr double kLogVarianceMax = 10.0;

/// Gaussian with diagonal covariance. Correlations are not representable.
class DiagonalGaussian {
 public:
  DiagonalGaussian(Eigen::VectorXd mean, Eigen::VectorXd variance)
      : mean_(std::move(mean)), variance_(std::move(variance)) {
    if (mean_.size() != variance_.size())
      throw UsageError("mean and variance lengths differ");
    if (!mean_.allFinite()) throw InputError("non-finite mean");
    if (!variance_.allFinite() || (variance_.array() <= 0.0).any())
      throw InputError("variances must be finite and strictly positive");
  }

  /// Variance = exp(clamp(log_variance, -10, 10)).
  static DiagonalGaussian from_log_variance(Eigen::VectorXd mean,
                                            const Eigen::VectorXd& log_variance) {
    return {std::move(mean),
            log_variance.array()
                .max(kLogVarianceMin)
                .min(kLogVarianceMax)
                .exp()
                .matrix()};
  }

  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& variance() const { return variance_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd variance_;
};

/// log N(x; mu, diag(sigma^2)).
inline double gaussian_log_density(const DiagonalGaussian& g,
                                   const Eigen::VectorXd& x) {
  if (x.size() != g.dim()) throw UsageError("dimension mismatch in log density");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const auto& mu = g.mean().array();
  const auto& var = g.variance().array();
  return (-half_log_2pi - 0.5 * var.log() -
          (x.array() - mu).square() / (2.0 * var))
      .sum();
}

/// Per-coordinate contribution to KL(p || q) for diagonal Gaussians:
/// 1/2 (log(q_var/p_var) - 1 + p_var/q_var + (q_mean - p_mean)^2 / q_var).
inline double kl_term(double p_mean, double p_var, double q_mean,
                      double q_var) {
  const double diff = q_mean - p_mean;
  return 0.5 * (std::log(q_var / p_var) - 1.0 + p_var / q_var +
                diff * diff / q_var);
}

/// KL(p || q) restricted to the given coordinates.
inline double kl_diag(const DiagonalGaussian& p, const DiagonalGaussian& q,
                      std::span<const std::size_t> indices) {
  if (indices.empty()) throw UsageError("kl_diag needs a non-empty index set");
  if (p.dim() != q.dim()) throw UsageError("kl_diag dimension mismatch");
  double sum = 0.0;
  for (auto i : indices) {
    if (i >= static_cast<std::size_t>(p.dim()))
      throw UsageError("kl_diag index out of range");
    const auto k = static_cast<Eigen::Index>(i);
    sum += kl_term(p.mean()[k], p.variance()[k], q.mean()[k], q.variance()[k]);
  }
  return sum;
}

/// KL(p || q) over all coordinates.
inline double kl_diag(const DiagonalGaussian& p, const DiagonalGaussian& q) {
  if (p.dim() != q.dim()) throw UsageError("kl_diag dimension mismatch");
  if (p.dim() == 0) throw UsageError("kl_diag needs a non-empty index set");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < p.dim(); ++k)
    sum += kl_term(p.mean()[k], p.variance()[k], q.mean()[k], q.variance()[k]);
  return sum;
}

}  // namespace mmvae
