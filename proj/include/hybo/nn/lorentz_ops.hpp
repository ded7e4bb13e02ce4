#pragma once

// Differentiable Lorentz-model operations on batches of points stored as the
// rows of an [N, n+1] tensor.

#include <optional>

#include "hybo/ad/tensor.hpp"
#include "hybo/lorentz/manifold.hpp"

namespace hybo::nn {

using ad::Tensor;
using lorentz::Curvature;

template <typename T> Tensor<T> time_part(const Tensor<T>& x);
template <typename T> Tensor<T> space_part(const Tensor<T>& x);

// Rows [sqrt(|s|^2 - 1/K), s] for spatial rows s.
template <typename T> Tensor<T> points_from_spatial(const Tensor<T>& spatial, Curvature K);

// Row-wise <x_i, y_i>_L as [N, 1].
template <typename T> Tensor<T> inner_rows(const Tensor<T>& x, const Tensor<T>& y);
// All pairs <x_i, y_j>_L as [N, M].
template <typename T> Tensor<T> inner_matrix(const Tensor<T>& x, const Tensor<T>& y);

template <typename T> Tensor<T> sqdist_rows(const Tensor<T>& x, const Tensor<T>& y, Curvature K);
template <typename T> Tensor<T> sqdist_matrix(const Tensor<T>& x, const Tensor<T>& y, Curvature K);

// Weighted Lorentzian centroid: row i of the result aggregates the rows of
// `points` with weights[i, :].
template <typename T> Tensor<T> centroid(const Tensor<T>& weights, const Tensor<T>& points, Curvature K);

// Distance-softmax attention weights: softmax_j(-d2(q_i, k_j) / sqrt(n)) with
// an optional additive [N, M] mask (large negative entries exclude keys).
template <typename T>
Tensor<T> attention_weights(const Tensor<T>& queries, const Tensor<T>& keys, std::size_t n, Curvature K,
                            const std::optional<Tensor<T>>& mask = std::nullopt);

template <typename T>
Tensor<T> lorentz_attention(const Tensor<T>& queries, const Tensor<T>& keys, const Tensor<T>& values, std::size_t n,
                            Curvature K, const std::optional<Tensor<T>>& mask = std::nullopt);

// Additive mask value that removes a key from the softmax.
template <typename T>
constexpr T mask_out() {
  return T(-1e30);
}

// Max over rows of |<x,x>_L - 1/K|, and whether every time coordinate is positive.
struct ManifoldCheck {
  double max_error = 0.0;
  bool time_positive = true;
  bool ok(double tol) const { return time_positive && max_error < tol; }
};
template <typename T> ManifoldCheck check_points(const Tensor<T>& points, Curvature K);

}  // namespace hybo::nn
