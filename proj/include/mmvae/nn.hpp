#pragma once

// Dense-network substrate: layers, a path-addressed parameter store with a
// mirrored gradient buffer, tape-based reverse mode and Adam.
//
// Batches are column-major: one sample per column.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"
#include "rng.hpp"

namespace mmvae {

enum class Activation { tanh, identity };

inline std::string_view to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "identity";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ConfigurationError("unknown activation '" + std::string(s) + "'");
}

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd biases;   // out
  Activation activation = Activation::identity;

  Eigen::Index in_size() const { return weights.cols(); }
  Eigen::Index out_size() const { return weights.rows(); }

  bool all_finite() const {
    return weights.allFinite() && biases.allFinite();
  }

  static DenseLayer zeros(Eigen::Index in, Eigen::Index out, Activation act) {
    return {Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out), act};
  }

  /// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero biases.
  static DenseLayer glorot(Eigen::Index in, Eigen::Index out, Activation act,
                           Rng& rng) {
    DenseLayer layer = zeros(in, out, act);
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    for (Eigen::Index j = 0; j < in; ++j)
      for (Eigen::Index i = 0; i < out; ++i)
        layer.weights(i, j) = rng.uniform(-a, a);
    return layer;
  }
};

namespace detail {

// tanh(x) = 1 - 2 / (1 + e^{2x}), using Eigen's vectorized exp.
inline void fast_tanh(Eigen::MatrixXd& m) {
  m.array() = 1.0 - 2.0 / (1.0 + (2.0 * m.array()).exp());
}

inline void apply_activation(Activation act, Eigen::MatrixXd& m) {
  if (act == Activation::tanh) fast_tanh(m);
}

inline Eigen::MatrixXd affine(const DenseLayer& layer,
                              const Eigen::MatrixXd& input) {
  Eigen::MatrixXd out(layer.out_size(), input.cols());
  out.noalias() = layer.weights * input;
  out.colwise() += layer.biases;
  apply_activation(layer.activation, out);
  return out;
}

}  // namespace detail

/// Stateless evaluation of a layer list on a batch.
inline Eigen::MatrixXd evaluate(std::span<const DenseLayer> layers,
                                const Eigen::MatrixXd& input) {
  if (layers.empty()) throw ConfigurationError("empty layer stack");
  Eigen::MatrixXd x = input;
  for (const auto& layer : layers) {
    if (layer.in_size() != x.rows())
      throw ConfigurationError("layer expects " +
                               std::to_string(layer.in_size()) +
                               " inputs, got " + std::to_string(x.rows()));
    x = detail::affine(layer, x);
  }
  return x;
}

inline Eigen::VectorXd evaluate(std::span<const DenseLayer> layers,
                                const Eigen::VectorXd& input) {
  return evaluate(layers, Eigen::MatrixXd(input)).col(0);
}

/// Ordered, path-addressed set of layers plus a gradient buffer of identical
/// shape. The version counter advances on every optimizer step so tapes
/// recorded against older parameters are detected.
class ParameterSet {
 public:
  using Id = std::size_t;

  Id add(std::string path, DenseLayer layer) {
    for (const auto& p : paths_)
      if (p == path) throw ConfigurationError("duplicate parameter path " + path);
    grads_.push_back(DenseLayer::zeros(layer.in_size(), layer.out_size(),
                                       layer.activation));
    layers_.push_back(std::move(layer));
    paths_.push_back(std::move(path));
    return layers_.size() - 1;
  }

  std::size_t size() const { return layers_.size(); }

  Id id(std::string_view path) const {
    for (std::size_t i = 0; i < paths_.size(); ++i)
      if (paths_[i] == path) return i;
    throw UsageError("no parameter group named '" + std::string(path) + "'");
  }

  const std::string& path(Id i) const { return paths_.at(i); }
  const std::vector<std::string>& paths() const { return paths_; }

  DenseLayer& layer(Id i) { return layers_.at(i); }
  const DenseLayer& layer(Id i) const { return layers_.at(i); }
  DenseLayer& layer(std::string_view p) { return layers_[id(p)]; }
  const DenseLayer& layer(std::string_view p) const { return layers_[id(p)]; }

  DenseLayer& gradient(Id i) { return grads_.at(i); }
  const DenseLayer& gradient(Id i) const { return grads_.at(i); }

  void zero_gradients() {
    for (auto& g : grads_) {
      g.weights.setZero();
      g.biases.setZero();
    }
  }

  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
      n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.all_finite()) return false;
    return true;
  }

  bool gradients_finite() const {
    for (const auto& g : grads_)
      if (!g.all_finite()) return false;
    return true;
  }

  /// Parameters as one vector: per group, weights column-major then biases.
  Eigen::VectorXd flatten() const { return flatten_impl(layers_); }
  Eigen::VectorXd flatten_gradient() const { return flatten_impl(grads_); }

  void assign(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count())
      throw UsageError("flat parameter vector has wrong length");
    Eigen::Index k = 0;
    for (auto& l : layers_) {
      for (Eigen::Index i = 0; i < l.weights.size(); ++i)
        l.weights.data()[i] = flat[k++];
      for (Eigen::Index i = 0; i < l.biases.size(); ++i) l.biases[i] = flat[k++];
    }
    ++version_;
  }

 private:
  static Eigen::VectorXd flatten_impl(const std::vector<DenseLayer>& src) {
    std::size_t n = 0;
    for (const auto& l : src)
      n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
    Eigen::VectorXd flat(static_cast<Eigen::Index>(n));
    Eigen::Index k = 0;
    for (const auto& l : src) {
      for (Eigen::Index i = 0; i < l.weights.size(); ++i)
        flat[k++] = l.weights.data()[i];
      for (Eigen::Index i = 0; i < l.biases.size(); ++i) flat[k++] = l.biases[i];
    }
    return flat;
  }

  std::vector<std::string> paths_;
  std::vector<DenseLayer> layers_;
  std::vector<DenseLayer> grads_;
  std::uint64_t version_ = 0;
};

/// Activations recorded by a forward pass over a stack of parameter groups.
class Tape {
 public:
  std::size_t depth() const { return stack_.size(); }
  Eigen::Index batch_size() const {
    return inputs_.empty() ? 0 : inputs_.front().cols();
  }

 private:
  friend struct TapeAccess;
  const ParameterSet* params_ = nullptr;
  std::uint64_t version_ = 0;
  std::vector<ParameterSet::Id> stack_;
  std::vector<Eigen::MatrixXd> inputs_;
  std::vector<Eigen::MatrixXd> outputs_;
};

struct Forward {
  Eigen::MatrixXd output;
  Tape tape;
};

struct TapeAccess {
  static Forward forward(const ParameterSet& params,
                         std::span<const ParameterSet::Id> stack,
                         const Eigen::MatrixXd& input) {
    if (stack.empty()) throw ConfigurationError("empty layer stack");
    Forward f;
    f.tape.params_ = &params;
    f.tape.version_ = params.version();
    f.tape.stack_.assign(stack.begin(), stack.end());
    f.tape.inputs_.reserve(stack.size());
    f.tape.outputs_.reserve(stack.size());
    const Eigen::MatrixXd* x = &input;
    for (auto id : stack) {
      const auto& layer = params.layer(id);
      if (layer.in_size() != x->rows())
        throw ConfigurationError(
            "parameter group '" + params.path(id) + "' expects " +
            std::to_string(layer.in_size()) + " inputs, got " +
            std::to_string(x->rows()));
      f.tape.inputs_.push_back(*x);
      f.tape.outputs_.push_back(detail::affine(layer, *x));
      x = &f.tape.outputs_.back();
    }
    f.output = f.tape.outputs_.back();
    return f;
  }

  static Eigen::MatrixXd backward(const Tape& tape,
                                  const Eigen::MatrixXd& grad_output,
                                  ParameterSet& params) {
    if (tape.params_ != &params)
      throw UsageError("tape was recorded against a different parameter set");
    if (tape.version_ != params.version())
      throw UsageError("stale tape: parameters changed since forward pass");
    if (tape.stack_.empty()) throw UsageError("empty tape");
    const auto& last = tape.outputs_.back();
    if (grad_output.rows() != last.rows() || grad_output.cols() != last.cols())
      throw UsageError("output gradient shape does not match tape");

    Eigen::MatrixXd grad = grad_output;
    for (std::size_t k = tape.stack_.size(); k-- > 0;) {
      const auto id = tape.stack_[k];
      const auto& layer = params.layer(id);
      auto& g = params.gradient(id);
      if (layer.activation == Activation::tanh)
        grad.array() *= 1.0 - tape.outputs_[k].array().square();
      g.weights.noalias() += grad * tape.inputs_[k].transpose();
      g.biases += grad.rowwise().sum();
      Eigen::MatrixXd next(layer.in_size(), grad.cols());
      next.noalias() = layer.weights.transpose() * grad;
      grad = std::move(next);
    }
    return grad;
  }
};

/// Runs the stack on a batch and records a tape for backward().
inline Forward forward(const ParameterSet& params,
                       std::span<const ParameterSet::Id> stack,
                       const Eigen::MatrixXd& input) {
  return TapeAccess::forward(params, stack, input);
}

/// Accumulates d(loss)/d(parameter) for every group on the tape into the
/// gradient buffer and returns d(loss)/d(input).
inline Eigen::MatrixXd backward(const Tape& tape,
                                const Eigen::MatrixXd& grad_output,
                                ParameterSet& params) {
  return TapeAccess::backward(tape, grad_output, params);
}

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moments. Owns moment buffers shaped like the
/// parameter set it was built for.
class Adam {
 public:
  Adam(const ParameterSet& params, AdamSettings settings)
      : settings_(settings) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& l = params.layer(i);
      m_.push_back(DenseLayer::zeros(l.in_size(), l.out_size(), l.activation));
      v_.push_back(DenseLayer::zeros(l.in_size(), l.out_size(), l.activation));
    }
  }

  const AdamSettings& settings() const { return settings_; }
  std::uint64_t steps() const { return t_; }
  const DenseLayer& first_moment(std::size_t i) const { return m_.at(i); }
  const DenseLayer& second_moment(std::size_t i) const { return v_.at(i); }

  /// Applies one update from the gradient buffer, then zeroes it.
  void step(ParameterSet& params, long epoch = -1) {
    if (params.size() != m_.size())
      throw UsageError("optimizer built for a different parameter set");
    if (!params.gradients_finite())
      throw TrainingError("non-finite gradient", epoch);
    ++t_;
    const double b1 = settings_.beta1, b2 = settings_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double lr = settings_.learning_rate;
    const double eps = settings_.epsilon;
    auto update = [&](auto&& x, const auto& g, auto&& m, auto&& v) {
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g.square();
      x -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params.layer(i);
      auto& g = params.gradient(i);
      update(p.weights.array(), g.weights.array(), m_[i].weights.array(),
             v_[i].weights.array());
      update(p.biases.array(), g.biases.array(), m_[i].biases.array(),
             v_[i].biases.array());
    }
    params.zero_gradients();
    params.bump_version();
    if (!params.all_finite())
      throw TrainingError("non-finite parameter after optimizer step", epoch);
  }

 private:
  AdamSettings settings_;
  std::vector<DenseLayer> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace mmvae
