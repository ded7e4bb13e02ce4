#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hybo/nn/lorentz_ops.hpp"
#include "hybo/nn/params.hpp"

namespace hybo::nn {

using Rng = std::mt19937_64;

enum class Activation { identity, relu };

// Composed reparametrized linear map on a batch: rows [sqrt(|W x|^2 - 1/K), W x] for a weight
// of shape [m, n+1]. v cancels out of the composed result.
template <typename T> Tensor<T> fx_transform(const Tensor<T>& weight, const Tensor<T>& points, Curvature K);

struct LinearOptions {
  double lambda = 2.5;
  bool learn_lambda = true;
  double epsilon = 1.1;
  Activation activation = Activation::identity;
  double dropout = 0.0;
  bool time_bias = true;     // b' inside the sigmoid
  bool spatial_bias = false; // b added to W h(x)
  double init_range = 0.02;
};

// Lorentz linear layer. forward() computes
//   y_0 = lambda * sigmoid(v^T x + b') + eps
//   y_s = sqrt(y_0^2 + 1/K) * u / |u|,   u = W h(dropout(x)) [+ b]
// and residual() computes, with the block input x as the bias,
//   y_s = lambda * sigmoid(v^T o + b') * u / |u|,  u = W h(dropout(o)) + x_s
//   y_0 = sqrt(|y_s|^2 - 1/K).
template <typename T>
class LorentzLinear {
 public:
  LorentzLinear() = default;

  static LorentzLinear create(ParameterStore<T>& store, const std::string& prefix, std::size_t in_features,
                              std::size_t out_spatial, const LinearOptions& options, Rng& rng,
                              Curvature K = Curvature());

  Tensor<T> forward(Bound<T>& params, const Tensor<T>& x, Rng* dropout_rng = nullptr) const;
  Tensor<T> residual(Bound<T>& params, const Tensor<T>& o, const Tensor<T>& x, Rng* dropout_rng = nullptr) const;

  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_spatial() const noexcept { return out_; }
  ParamId weight() const noexcept { return weight_; }
  ParamId v() const noexcept { return v_; }
  const LinearOptions& options() const noexcept { return opts_; }

 private:
  Tensor<T> scale_argument(Bound<T>& params, const Tensor<T>& x) const;
  Tensor<T> lambda(Bound<T>& params) const;
  Tensor<T> transformed(Bound<T>& params, const Tensor<T>& x, Rng* dropout_rng) const;

  std::size_t in_ = 0, out_ = 0;
  LinearOptions opts_;
  Curvature K_;
  ParamId weight_, v_;
  std::optional<ParamId> log_lambda_, time_bias_, spatial_bias_;
};

// Rows whose transformed direction vanished since process start; such rows
// fall back to the origin (forward) or the block input (residual).
std::size_t degenerate_row_count();

struct AttentionConfig {
  std::size_t heads = 1;
  std::size_t in_features = 0;    // coordinates of input points (n + 1)
  std::size_t head_spatial = 0;   // spatial dimension of each head
  std::size_t out_spatial = 0;    // spatial dimension of the output points
  LinearOptions projection;
  LinearOptions output;
};

// Per-head Q/K/V Lorentz linear layers, distance attention per head, the
// full head points concatenated and mapped back by one output layer.
template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;

  static MultiHeadAttention create(ParameterStore<T>& store, const std::string& prefix, const AttentionConfig& config,
                                   Rng& rng, Curvature K = Curvature());

  Tensor<T> forward(Bound<T>& params, const Tensor<T>& queries, const Tensor<T>& keys, const Tensor<T>& values,
                    const std::optional<Tensor<T>>& mask = std::nullopt, Rng* dropout_rng = nullptr) const;

  const AttentionConfig& config() const noexcept { return config_; }

 private:
  AttentionConfig config_;
  Curvature K_;
  std::vector<LorentzLinear<T>> q_, k_, v_;
  LorentzLinear<T> out_;
};

}  // namespace hybo::nn
