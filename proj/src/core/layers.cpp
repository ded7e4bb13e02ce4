#include "hybo/nn/layers.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace hybo::nn {

using namespace hybo::ad;

namespace {

std::atomic<std::size_t> degenerate_rows{0};

// Rows whose norm is below the degeneracy threshold, as a 0/1 keep-mask, or
// nullopt when every row is fine.
template <typename T>
std::optional<std::vector<T>> degenerate_mask(const Tensor<T>& norms) {
  const auto v = norms.values();
  std::optional<std::vector<T>> keep;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < T(1e-12)) {
      if (!keep) keep.emplace(v.size(), T(1));
      (*keep)[i] = T(0);
      degenerate_rows.fetch_add(1, std::memory_order_relaxed);
    }
  }
  return keep;
}

template <typename T>
Tensor<T> uniform_init(Shape shape, double range, Rng& rng) {
  std::uniform_real_distribution<double> dist(-range, range);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(v));
}

}  // namespace

std::size_t degenerate_row_count() { return degenerate_rows.load(); }

template <typename T>
Tensor<T> fx_transform(const Tensor<T>& weight, const Tensor<T>& points, Curvature K) {
  if (weight.cols() != points.cols()) {
    throw ShapeError("fx_transform: weight " + shape_str(weight.shape()) + " does not accept points " +
                     shape_str(points.shape()));
  }
  return points_from_spatial(matmul(points, transpose(weight)), K);
}

template <typename T>
LorentzLinear<T> LorentzLinear<T>::create(ParameterStore<T>& store, const std::string& prefix,
                                          std::size_t in_features, std::size_t out_spatial,
                                          const LinearOptions& options, Rng& rng, Curvature K) {
  if (in_features < 2 || out_spatial < 1) throw std::invalid_argument(prefix + ": invalid layer dimensions");
  if (!(options.lambda > 0.0)) throw std::invalid_argument(prefix + ": lambda must be positive");
  if (!(options.epsilon > std::sqrt(-1.0 / K.value()))) {
    throw std::invalid_argument(prefix + ": epsilon must exceed sqrt(-1/K)");
  }
  if (options.dropout < 0.0 || options.dropout >= 1.0) throw std::invalid_argument(prefix + ": dropout outside [0,1)");
  LorentzLinear layer;
  layer.in_ = in_features;
  layer.out_ = out_spatial;
  layer.opts_ = options;
  layer.K_ = K;
  layer.weight_ = store.add(prefix + ".weight", uniform_init<T>({out_spatial, in_features}, options.init_range, rng));
  layer.v_ = store.add(prefix + ".v", uniform_init<T>({in_features, 1}, options.init_range, rng));
  if (options.learn_lambda) {
    layer.log_lambda_ = store.add(prefix + ".log_lambda", Tensor<T>::scalar(static_cast<T>(std::log(options.lambda))));
  }
  if (options.time_bias) layer.time_bias_ = store.add(prefix + ".time_bias", Tensor<T>::scalar(T(0)));
  if (options.spatial_bias) layer.spatial_bias_ = store.add(prefix + ".bias", Tensor<T>::zeros({1, out_spatial}));
  return layer;
}

template <typename T>
Tensor<T> LorentzLinear<T>::lambda(Bound<T>& params) const {
  if (log_lambda_) return exp(params[*log_lambda_]);
  return Tensor<T>::scalar(static_cast<T>(opts_.lambda));
}

template <typename T>
Tensor<T> LorentzLinear<T>::scale_argument(Bound<T>& params, const Tensor<T>& x) const {
  Tensor<T> a = matmul(x, params[v_]);
  if (time_bias_) a = a + params[*time_bias_];
  return a;
}

template <typename T>
Tensor<T> LorentzLinear<T>::transformed(Bound<T>& params, const Tensor<T>& x, Rng* dropout_rng) const {
  if (x.ndim() != 2 || x.cols() != in_) {
    throw ShapeError("lorentz_linear: expected [N, " + std::to_string(in_) + "] input, got " + shape_str(x.shape()));
  }
  Tensor<T> h = x;
  if (dropout_rng != nullptr && opts_.dropout > 0.0) h = dropout(h, static_cast<T>(opts_.dropout), *dropout_rng);
  if (opts_.activation == Activation::relu) h = relu(h);
  Tensor<T> u = matmul(h, transpose(params[weight_]));
  if (spatial_bias_) u = u + matmul(Tensor<T>::full({x.rows(), 1}, T(1)), params[*spatial_bias_]);
  return u;
}

template <typename T>
Tensor<T> LorentzLinear<T>::forward(Bound<T>& params, const Tensor<T>& x, Rng* dropout_rng) const {
  const Tensor<T> u = transformed(params, x, dropout_rng);
  const Tensor<T> y0 = lambda(params) * sigmoid(scale_argument(params, x)) + static_cast<T>(opts_.epsilon);
  const Tensor<T> target = sqrt(square(y0) + K_.inv<T>());
  const Tensor<T> norm = norm2_last(u);
  const auto keep = degenerate_mask(norm);
  if (!keep) return concat_last<T>({y0, u * broadcast_last(target / norm, out_)});

  // Degenerate rows collapse to the origin.
  const Tensor<T> keep_col(norm.shape(), *keep);
  std::vector<T> drop(keep->size());
  for (std::size_t i = 0; i < drop.size(); ++i) drop[i] = T(1) - (*keep)[i];
  const Tensor<T> drop_col(norm.shape(), drop);
  const Tensor<T> safe_norm = norm + drop_col;
  const Tensor<T> spatial = u * broadcast_last(target / safe_norm * keep_col, out_);
  const Tensor<T> time = y0 * keep_col + drop_col * std::sqrt(-K_.inv<T>());
  return concat_last<T>({time, spatial});
}

template <typename T>
Tensor<T> LorentzLinear<T>::residual(Bound<T>& params, const Tensor<T>& o, const Tensor<T>& x,
                                     Rng* dropout_rng) const {
  if (x.ndim() != 2 || x.cols() != out_ + 1 || x.rows() != o.rows()) {
    throw ShapeError("lorentz_residual: bias points " + shape_str(x.shape()) + " do not match output width " +
                     std::to_string(out_ + 1));
  }
  const Tensor<T> u = transformed(params, o, dropout_rng) + space_part(x);
  const Tensor<T> s = lambda(params) * sigmoid(scale_argument(params, o));
  const Tensor<T> norm = norm2_last(u);
  const auto keep = degenerate_mask(norm);
  if (!keep) {
    const Tensor<T> spatial = u * broadcast_last(s / norm, out_);
    return points_from_spatial(spatial, K_);
  }

  // Degenerate rows pass the block input through unchanged.
  const Tensor<T> keep_col(norm.shape(), *keep);
  std::vector<T> drop(keep->size());
  for (std::size_t i = 0; i < drop.size(); ++i) drop[i] = T(1) - (*keep)[i];
  const Tensor<T> drop_col(norm.shape(), drop);
  const Tensor<T> spatial = u * broadcast_last(s / (norm + drop_col) * keep_col, out_);
  const Tensor<T> mixed = points_from_spatial(spatial, K_) * broadcast_last(keep_col, out_ + 1) +
                          x * broadcast_last(drop_col, out_ + 1);
  return mixed;
}

template <typename T>
MultiHeadAttention<T> MultiHeadAttention<T>::create(ParameterStore<T>& store, const std::string& prefix,
                                                    const AttentionConfig& config, Rng& rng, Curvature K) {
  if (config.heads == 0) throw std::invalid_argument(prefix + ": need at least one head");
  MultiHeadAttention mha;
  mha.config_ = config;
  mha.K_ = K;
  for (std::size_t h = 0; h < config.heads; ++h) {
    const std::string head = prefix + ".head" + std::to_string(h);
    mha.q_.push_back(
        LorentzLinear<T>::create(store, head + ".query", config.in_features, config.head_spatial, config.projection, rng, K));
    mha.k_.push_back(
        LorentzLinear<T>::create(store, head + ".key", config.in_features, config.head_spatial, config.projection, rng, K));
    mha.v_.push_back(
        LorentzLinear<T>::create(store, head + ".value", config.in_features, config.head_spatial, config.projection, rng, K));
  }
  mha.out_ = LorentzLinear<T>::create(store, prefix + ".output", config.heads * (config.head_spatial + 1),
                                      config.out_spatial, config.output, rng, K);
  return mha;
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::forward(Bound<T>& params, const Tensor<T>& queries, const Tensor<T>& keys,
                                         const Tensor<T>& values, const std::optional<Tensor<T>>& mask,
                                         Rng* dropout_rng) const {
  std::vector<Tensor<T>> heads;
  heads.reserve(config_.heads);
  for (std::size_t h = 0; h < config_.heads; ++h) {
    const Tensor<T> q = q_[h].forward(params, queries, dropout_rng);
    const Tensor<T> k = k_[h].forward(params, keys, dropout_rng);
    const Tensor<T> v = v_[h].forward(params, values, dropout_rng);
    heads.push_back(lorentz_attention(q, k, v, config_.head_spatial, K_, mask));
  }
  return out_.forward(params, concat_last(heads), dropout_rng);
}

template Tensor<float> fx_transform(const Tensor<float>&, const Tensor<float>&, Curvature);
template Tensor<double> fx_transform(const Tensor<double>&, const Tensor<double>&, Curvature);
template class LorentzLinear<float>;
template class LorentzLinear<double>;
template class MultiHeadAttention<float>;
template class MultiHeadAttention<double>;

}  // namespace hybo::nn
