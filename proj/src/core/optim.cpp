#include "hybo/train/optim.hpp"

#include <cmath>

namespace hybo::train {

template <typename T>
double clip_global_norm(std::vector<std::vector<T>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (T x : g) sq += static_cast<double>(x) * static_cast<double>(x);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads)
      for (T& x : g) x = static_cast<T>(static_cast<double>(x) * scale);
  }
  return norm;
}

template <typename T>
void project_rows(std::vector<T>& values, std::size_t cols, double max_norm) {
  if (max_norm <= 0.0 || cols == 0) return;
  for (std::size_t r = 0; r < values.size() / cols; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sq += static_cast<double>(values[r * cols + c]) * values[r * cols + c];
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
      for (std::size_t c = 0; c < cols; ++c) {
        values[r * cols + c] = static_cast<T>(static_cast<double>(values[r * cols + c]) * (max_norm / norm));
      }
    }
  }
}

template <typename T>
Optimizer<T>::Optimizer(const ParameterStore<T>& store, OptimConfig config, Curvature K)
    : config_(config), K_(K) {
  if (!(config.lr > 0.0)) throw std::invalid_argument("optimizer: learning rate must be positive");
  if (config.beta1 < 0 || config.beta1 >= 1 || config.beta2 < 0 || config.beta2 >= 1) {
    throw std::invalid_argument("optimizer: betas must lie in [0, 1)");
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    m_.emplace_back(store.entry(i).value.numel(), T(0));
    v_.emplace_back(store.entry(i).value.numel(), T(0));
  }
}

template <typename T>
void Optimizer<T>::rsgd_rows(std::vector<T>& values, const std::vector<T>& grad, std::size_t cols) const {
  using V = lorentz::Vec<double>;
  const std::size_t rows = values.size() / cols;
  for (std::size_t r = 0; r < rows; ++r) {
    V s(static_cast<Eigen::Index>(cols));
    V h = V::Zero(static_cast<Eigen::Index>(cols + 1));
    for (std::size_t c = 0; c < cols; ++c) {
      s(static_cast<Eigen::Index>(c)) = static_cast<double>(values[r * cols + c]);
      h(static_cast<Eigen::Index>(c + 1)) = static_cast<double>(grad[r * cols + c]);
    }
    const V x = lorentz::project_to_hyperboloid<double>(s, K_);
    const V u = lorentz::project_to_tangent<double>(x, h, K_);
    const V y = lorentz::exp_map<double>(x, V(-config_.lr * u), K_);
    for (std::size_t c = 0; c < cols; ++c) values[r * cols + c] = static_cast<T>(y(static_cast<Eigen::Index>(c + 1)));
  }
}

template <typename T>
double Optimizer<T>::step(ParameterStore<T>& store, std::vector<std::vector<T>> grads) {
  if (grads.size() != store.size()) throw std::invalid_argument("optimizer: gradient count does not match parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != store.entry(i).value.numel()) {
      throw std::invalid_argument("optimizer: gradient shape mismatch for " + store.entry(i).name);
    }
    for (T g : grads[i]) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericalError("non-finite gradient in parameter '" + store.entry(i).name + "'");
      }
    }
  }
  const double norm = clip_global_norm(grads, config_.grad_norm);
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(i);
    const std::size_t cols = e.value.ndim() == 2 ? e.value.cols() : e.value.numel();
    const bool rows = e.kind == nn::ParamKind::lorentz_rows;
    auto span = e.value.mutable_values();
    std::vector<T> values(span.begin(), span.end());
    const auto& g = grads[i];
    if (config_.kind == OptimizerKind::rsgd) {
      if (rows) {
        rsgd_rows(values, g, cols);
      } else {
        for (std::size_t k = 0; k < values.size(); ++k) values[k] -= static_cast<T>(config_.lr) * g[k];
      }
    } else {
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t k = 0; k < values.size(); ++k) {
        const double gk = static_cast<double>(g[k]);
        m[k] = static_cast<T>(config_.beta1 * m[k] + (1.0 - config_.beta1) * gk);
        v[k] = static_cast<T>(config_.beta2 * v[k] + (1.0 - config_.beta2) * gk * gk);
        const double mh = static_cast<double>(m[k]) / c1;
        const double vh = static_cast<double>(v[k]) / c2;
        values[k] = static_cast<T>(static_cast<double>(values[k]) - config_.lr * mh / (std::sqrt(vh) + config_.eps));
      }
    }
    if (rows) project_rows(values, cols, config_.max_norm);
    std::copy(values.begin(), values.end(), span.begin());
  }
  return norm;
}

template double clip_global_norm(std::vector<std::vector<float>>&, double);
template double clip_global_norm(std::vector<std::vector<double>>&, double);
template void project_rows(std::vector<float>&, std::size_t, double);
template void project_rows(std::vector<double>&, std::size_t, double);
template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace hybo::train
