#pragma once

// Low-rank adapters on dense projections: W' = W + alpha * A * B^T with
// A in R^{d_out x r}, B in R^{d_in x r}. alpha is a raw scale (no 1/r).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "robogrid/error.hpp"

namespace robogrid::lora {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct DenseLayer {
  MatrixXd weight;  // d_out x d_in
  std::optional<VectorXd> bias;

  Eigen::Index d_out() const { return weight.rows(); }
  Eigen::Index d_in() const { return weight.cols(); }

  VectorXd forward(const VectorXd& x) const {
    if (x.size() != d_in()) {
      throw InvalidInput("input has " + std::to_string(x.size()) + " entries, layer expects " +
                         std::to_string(d_in()));
    }
    VectorXd y = weight * x;
    if (bias) y += *bias;
    return y;
  }

  // Applies the layer to every row of `rows` (tokens x d_in).
  MatrixXd forward_rows(const MatrixXd& rows) const {
    if (rows.cols() != d_in()) throw InvalidInput("row width does not match layer input dimension");
    MatrixXd y = rows * weight.transpose();
    if (bias) y.rowwise() += bias->transpose();
    return y;
  }
};

struct LoraAdapter {
  MatrixXd a;  // d_out x r
  MatrixXd b;  // d_in x r
  double alpha = 1.0;

  Eigen::Index rank() const { return a.cols(); }
  MatrixXd delta_weight() const { return alpha * a * b.transpose(); }
};

inline void check_compatible(const DenseLayer& layer, const LoraAdapter& adapter) {
  if (layer.bias && layer.bias->size() != layer.d_out()) {
    throw InvalidInput("bias length does not match layer output dimension");
  }
  if (adapter.a.cols() != adapter.b.cols()) {
    throw InvalidInput("adapter factors disagree on rank: A has " + std::to_string(adapter.a.cols()) +
                       " columns, B has " + std::to_string(adapter.b.cols()));
  }
  if (adapter.a.rows() != layer.d_out() || adapter.b.rows() != layer.d_in()) {
    throw InvalidInput("adapter shape (" + std::to_string(adapter.a.rows()) + "x" + std::to_string(adapter.rank()) +
                       ", " + std::to_string(adapter.b.rows()) + "x" + std::to_string(adapter.rank()) +
                       ") does not fit a " + std::to_string(layer.d_out()) + "x" + std::to_string(layer.d_in()) +
                       " layer");
  }
  if (adapter.rank() < 1 || adapter.rank() > std::min(layer.d_out(), layer.d_in())) {
    throw InvalidInput("adapter rank " + std::to_string(adapter.rank()) + " must be in [1, min(d_out, d_in)]");
  }
}

// W x + alpha * A (B^T x) + bias, without forming the d_out x d_in update.
inline VectorXd lora_forward(const DenseLayer& layer, const LoraAdapter& adapter, const VectorXd& x) {
  check_compatible(layer, adapter);
  VectorXd y = layer.forward(x);
  y.noalias() += adapter.alpha * (adapter.a * (adapter.b.transpose() * x));
  return y;
}

inline MatrixXd lora_forward_rows(const DenseLayer& layer, const LoraAdapter& adapter, const MatrixXd& rows) {
  check_compatible(layer, adapter);
  MatrixXd y = layer.forward_rows(rows);
  y.noalias() += adapter.alpha * ((rows * adapter.b) * adapter.a.transpose());
  return y;
}

// Returns a new layer; the input is not modified.
inline DenseLayer merge_adapter(const DenseLayer& layer, const LoraAdapter& adapter) {
  check_compatible(layer, adapter);
  DenseLayer merged = layer;
  if (adapter.alpha != 0.0) merged.weight += adapter.delta_weight();
  return merged;
}

// Trainable parameters of one adapted d_out x d_in matrix.
inline std::int64_t param_count(std::int64_t d_out, std::int64_t d_in, std::int64_t rank) {
  if (d_out < 1 || d_in < 1 || rank < 1) throw InvalidInput("dimensions and rank must be positive");
  return rank * (d_out + d_in);
}

// A ~ N(0, stddev^2) from a seeded engine, B = 0, alpha = 1, so a fresh
// adapter leaves the layer's function unchanged.
inline LoraAdapter init_adapter(Eigen::Index d_out, Eigen::Index d_in, Eigen::Index rank, std::uint64_t seed,
                                double stddev = 0.02) {
  if (d_out < 1 || d_in < 1) throw InvalidInput("adapter dimensions must be positive");
  if (rank < 1 || rank > std::min(d_out, d_in)) {
    throw InvalidInput("adapter rank " + std::to_string(rank) + " must be in [1, " +
                       std::to_string(std::min(d_out, d_in)) + "]");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  LoraAdapter adapter;
  adapter.a.resize(d_out, rank);
  for (Eigen::Index j = 0; j < rank; ++j) {
    for (Eigen::Index i = 0; i < d_out; ++i) adapter.a(i, j) = normal(rng);
  }
  adapter.b = MatrixXd::Zero(d_in, rank);
  adapter.alpha = 1.0;
  return adapter;
}

struct LossGradients {
  double loss = 0.0;
  MatrixXd grad_a;
  MatrixXd grad_b;
};

inline double squared_error_loss(const DenseLayer& layer, const LoraAdapter& adapter, const VectorXd& x,
                                 const VectorXd& target) {
  return (lora_forward(layer, adapter, x) - target).squaredNorm();
}

// Analytic gradients of L = ||lora_forward(x) - y||^2 with e = residual:
//   dL/dA = 2 alpha e (B^T x)^T,  dL/dB = 2 alpha x (A^T e)^T.
inline LossGradients squared_error_gradients(const DenseLayer& layer, const LoraAdapter& adapter, const VectorXd& x,
                                             const VectorXd& target) {
  if (target.size() != layer.d_out()) throw InvalidInput("target length does not match layer output dimension");
  const VectorXd e = lora_forward(layer, adapter, x) - target;
  LossGradients g;
  g.loss = e.squaredNorm();
  g.grad_a = 2.0 * adapter.alpha * e * (adapter.b.transpose() * x).transpose();
  g.grad_b = 2.0 * adapter.alpha * x * (adapter.a.transpose() * e).transpose();
  return g;
}

// Central finite differences of squared_error_loss w.r.t. every entry of A and
// B. Used by the lora-demo report.
inline LossGradients central_difference_gradients(const DenseLayer& layer, const LoraAdapter& adapter,
                                                  const VectorXd& x, const VectorXd& target, double step = 1e-6) {
  LossGradients g;
  g.loss = squared_error_loss(layer, adapter, x, target);
  LoraAdapter probe = adapter;
  auto differentiate = [&](MatrixXd& factor) {
    MatrixXd grad(factor.rows(), factor.cols());
    for (Eigen::Index j = 0; j < factor.cols(); ++j) {
      for (Eigen::Index i = 0; i < factor.rows(); ++i) {
        const double saved = factor(i, j);
        factor(i, j) = saved + step;
        const double up = squared_error_loss(layer, probe, x, target);
        factor(i, j) = saved - step;
        const double down = squared_error_loss(layer, probe, x, target);
        factor(i, j) = saved;
        grad(i, j) = (up - down) / (2.0 * step);
      }
    }
    return grad;
  };
  g.grad_a = differentiate(probe.a);
  g.grad_b = differentiate(probe.b);
  return g;
}

inline double relative_error(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

// Single-head transformer block without normalization, used to exercise
// adapters on the projections they are meant for.
class ToyAttentionBlock {
 public:
  static constexpr std::array<std::string_view, 6> kLayerNames = {"q_proj", "k_proj", "v_proj",
                                                                  "out_proj", "ff1", "ff2"};
  static constexpr std::array<std::string_view, 4> kAdaptable = {"q_proj", "v_proj", "ff1", "ff2"};

  static bool is_adaptable(std::string_view name) {
    return std::find(kAdaptable.begin(), kAdaptable.end(), name) != kAdaptable.end();
  }

  ToyAttentionBlock(DenseLayer q, DenseLayer k, DenseLayer v, DenseLayer out, DenseLayer ff1, DenseLayer ff2) {
    layers_["q_proj"] = std::move(q);
    layers_["k_proj"] = std::move(k);
    layers_["v_proj"] = std::move(v);
    layers_["out_proj"] = std::move(out);
    layers_["ff1"] = std::move(ff1);
    layers_["ff2"] = std::move(ff2);
    const Eigen::Index d = layers_.at("q_proj").d_in();
    for (auto name : {"q_proj", "k_proj", "v_proj"}) {
      const auto& l = layers_.at(name);
      if (l.d_in() != d || l.d_out() != d) throw InvalidInput(std::string(name) + " must be d_model x d_model");
    }
    if (layers_.at("out_proj").d_in() != d || layers_.at("out_proj").d_out() != d) {
      throw InvalidInput("out_proj must be d_model x d_model");
    }
    if (layers_.at("ff1").d_in() != d || layers_.at("ff2").d_out() != d ||
        layers_.at("ff2").d_in() != layers_.at("ff1").d_out()) {
      throw InvalidInput("feed-forward layers must map d_model -> d_ff -> d_model");
    }
  }

  // Gaussian weights with std 1/sqrt(fan_in), zero biases.
  static ToyAttentionBlock random(Eigen::Index d_model, Eigen::Index d_ff, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto make = [&](Eigen::Index out, Eigen::Index in) {
      std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
      DenseLayer l;
      l.weight.resize(out, in);
      for (Eigen::Index j = 0; j < in; ++j) {
        for (Eigen::Index i = 0; i < out; ++i) l.weight(i, j) = normal(rng);
      }
      l.bias = VectorXd::Zero(out);
      return l;
    };
    DenseLayer q = make(d_model, d_model);
    DenseLayer k = make(d_model, d_model);
    DenseLayer v = make(d_model, d_model);
    DenseLayer o = make(d_model, d_model);
    DenseLayer f1 = make(d_ff, d_model);
    DenseLayer f2 = make(d_model, d_ff);
    return ToyAttentionBlock(std::move(q), std::move(k), std::move(v), std::move(o), std::move(f1), std::move(f2));
  }

  const DenseLayer& layer(std::string_view name) const {
    auto it = layers_.find(std::string(name));
    if (it == layers_.end()) throw InvalidInput("unknown layer '" + std::string(name) + "'");
    return it->second;
  }

  void attach_adapter(std::string_view name, LoraAdapter adapter) {
    if (!is_adaptable(name)) {
      throw InvalidInput("adapters attach only to q_proj, v_proj, ff1, ff2; got '" + std::string(name) + "'");
    }
    check_compatible(layer(name), adapter);
    adapters_[std::string(name)] = std::move(adapter);
  }

  const std::map<std::string, LoraAdapter>& adapters() const { return adapters_; }

  std::int64_t trainable_parameters() const {
    std::int64_t n = 0;
    for (const auto& [name, a] : adapters_) n += param_count(a.a.rows(), a.b.rows(), a.rank());
    return n;
  }

  std::int64_t frozen_parameters() const {
    std::int64_t n = 0;
    for (const auto& [name, l] : layers_) n += l.weight.size() + (l.bias ? l.bias->size() : 0);
    return n;
  }

  // tokens x d_model -> tokens x d_model. Adapted layers run unmerged.
  MatrixXd forward(const MatrixXd& tokens) const {
    const Eigen::Index d = layer("q_proj").d_in();
    if (tokens.cols() != d) throw InvalidInput("token width does not match d_model");
    const MatrixXd q = apply("q_proj", tokens);
    const MatrixXd k = apply("k_proj", tokens);
    const MatrixXd v = apply("v_proj", tokens);
    MatrixXd scores = (q * k.transpose()) / std::sqrt(static_cast<double>(d));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      const double peak = scores.row(i).maxCoeff();
      scores.row(i) = (scores.row(i).array() - peak).exp().matrix();
      scores.row(i) /= scores.row(i).sum();
    }
    const MatrixXd hidden = tokens + apply("out_proj", scores * v);
    const MatrixXd ff = apply("ff1", hidden).cwiseMax(0.0);
    return hidden + apply("ff2", ff);
  }

  // Copy with every adapter folded into its layer and no adapters attached.
  ToyAttentionBlock merged() const {
    ToyAttentionBlock out = *this;
    for (const auto& [name, a] : adapters_) out.layers_[name] = merge_adapter(layers_.at(name), a);
    out.adapters_.clear();
    return out;
  }

 private:
  MatrixXd apply(const std::string& name, const MatrixXd& rows) const {
    auto it = adapters_.find(name);
    if (it == adapters_.end()) return layers_.at(name).forward_rows(rows);
    return lora_forward_rows(layers_.at(name), it->second, rows);
  }

  std::map<std::string, DenseLayer> layers_;
  std::map<std::string, LoraAdapter> adapters_;
};

}  // namespace robogrid::lora
