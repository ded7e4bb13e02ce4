#include "hybo/nn/lorentz_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hybo::nn {

using namespace hybo::ad;

template <typename T>
Tensor<T> time_part(const Tensor<T>& x) {
  return slice_last(x, 0, 1);
}

template <typename T>
Tensor<T> space_part(const Tensor<T>& x) {
  return slice_last(x, 1, x.cols());
}

template <typename T>
Tensor<T> points_from_spatial(const Tensor<T>& spatial, Curvature K) {
  const Tensor<T> t = sqrt(sum_last(square(spatial)) - K.inv<T>());
  return concat_last<T>({t, spatial});
}

template <typename T>
Tensor<T> inner_rows(const Tensor<T>& x, const Tensor<T>& y) {
  return sum_last(x * y) - T(2) * (time_part(x) * time_part(y));
}

template <typename T>
Tensor<T> inner_matrix(const Tensor<T>& x, const Tensor<T>& y) {
  if (x.cols() != y.cols()) throw ShapeError("inner_matrix: point dimensions differ");
  return matmul(space_part(x), transpose(space_part(y))) - matmul(time_part(x), transpose(time_part(y)));
}

template <typename T>
Tensor<T> sqdist_rows(const Tensor<T>& x, const Tensor<T>& y, Curvature K) {
  return T(2) * K.inv<T>() - T(2) * inner_rows(x, y);
}

template <typename T>
Tensor<T> sqdist_matrix(const Tensor<T>& x, const Tensor<T>& y, Curvature K) {
  return T(2) * K.inv<T>() - T(2) * inner_matrix(x, y);
}

template <typename T>
Tensor<T> centroid(const Tensor<T>& weights, const Tensor<T>& points, Curvature K) {
  if (weights.cols() != points.rows()) throw ShapeError("centroid: weights and points do not conform");
  const Tensor<T> s = matmul(weights, points);
  const Tensor<T> nsq = inner_rows(s, s);
  for (T v : nsq.values()) {
    if (!(v < T(0))) throw lorentz::GeometryError("centroid: weighted sum is not time-like");
  }
  const Tensor<T> denom = K.sqrt_neg<T>() * sqrt(-nsq);
  return s / broadcast_last(denom, s.cols());
}

template <typename T>
Tensor<T> attention_weights(const Tensor<T>& queries, const Tensor<T>& keys, std::size_t n, Curvature K,
                            const std::optional<Tensor<T>>& mask) {
  if (keys.rows() == 0) throw ShapeError("attention: empty key set");
  Tensor<T> logits = sqdist_matrix(queries, keys, K) * (T(-1) / std::sqrt(static_cast<T>(n)));
  if (mask) logits = logits + *mask;
  return softmax_last(logits);
}

template <typename T>
Tensor<T> lorentz_attention(const Tensor<T>& queries, const Tensor<T>& keys, const Tensor<T>& values, std::size_t n,
                            Curvature K, const std::optional<Tensor<T>>& mask) {
  if (keys.rows() != values.rows()) throw ShapeError("attention: key and value counts differ");
  return centroid(attention_weights(queries, keys, n, K, mask), values, K);
}

template <typename T>
ManifoldCheck check_points(const Tensor<T>& points, Curvature K) {
  ManifoldCheck out;
  const std::size_t d = points.cols();
  const std::size_t n = points.numel() / d;
  const auto v = points.values();
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = v.data() + r * d;
    double inner = -static_cast<double>(row[0]) * static_cast<double>(row[0]);
    for (std::size_t c = 1; c < d; ++c) inner += static_cast<double>(row[c]) * static_cast<double>(row[c]);
    const double err = std::abs(inner - 1.0 / K.value());
    out.max_error = std::isnan(err) ? std::numeric_limits<double>::infinity() : std::max(out.max_error, err);
    if (!(row[0] > T(0))) out.time_positive = false;
  }
  return out;
}

#define HYBO_INSTANTIATE(T)                                                                                \
  template Tensor<T> time_part(const Tensor<T>&);                                                         \
  template Tensor<T> space_part(const Tensor<T>&);                                                        \
  template Tensor<T> points_from_spatial(const Tensor<T>&, Curvature);                                    \
  template Tensor<T> inner_rows(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> inner_matrix(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sqdist_rows(const Tensor<T>&, const Tensor<T>&, Curvature);                          \
  template Tensor<T> sqdist_matrix(const Tensor<T>&, const Tensor<T>&, Curvature);                        \
  template Tensor<T> centroid(const Tensor<T>&, const Tensor<T>&, Curvature);                             \
  template Tensor<T> attention_weights(const Tensor<T>&, const Tensor<T>&, std::size_t, Curvature,       \
                                       const std::optional<Tensor<T>>&);                                   \
  template Tensor<T> lorentz_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, \
                                       Curvature, const std::optional<Tensor<T>>&);                        \
  template ManifoldCheck check_points(const Tensor<T>&, Curvature);

HYBO_INSTANTIATE(float)
HYBO_INSTANTIATE(double)
#undef HYBO_INSTANTIATE

}  // namespace hybo::nn
