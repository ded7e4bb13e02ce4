#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybo/nn/params.hpp"
#include "hybo/lorentz/manifold.hpp"

namespace hybo::train {

using lorentz::Curvature;
using nn::ParameterStore;

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OptimizerKind { adam, rsgd };

struct OptimConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 5e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double grad_norm = 0.0;  // global gradient-norm clip, 0 = off
  double max_norm = 0.0;   // spatial norm bound for Lorentz rows, 0 = off
};

// Scales all gradients so their joint L2 norm is at most max_norm; returns
// the norm before clipping.
template <typename T>
double clip_global_norm(std::vector<std::vector<T>>& grads, double max_norm);

// Rescales each row whose norm exceeds max_norm to exactly max_norm.
template <typename T>
void project_rows(std::vector<T>& values, std::size_t cols, double max_norm);

// Adam (bias-corrected) on every parameter, or Riemannian SGD: Lorentz-row
// parameters move along the exp map of the tangent-projected gradient while
// Euclidean parameters take plain SGD steps. Each step is followed by the
// max-norm projection of Lorentz rows.
template <typename T>
class Optimizer {
 public:
  Optimizer(const ParameterStore<T>& store, OptimConfig config, Curvature K = Curvature());

  // Throws NumericalError naming the first parameter with a non-finite
  // gradient; the store is left untouched in that case. Returns the global
  // gradient norm before clipping.
  double step(ParameterStore<T>& store, std::vector<std::vector<T>> grads);

  std::size_t steps() const noexcept { return steps_; }
  const OptimConfig& config() const noexcept { return config_; }

 private:
  void rsgd_rows(std::vector<T>& values, const std::vector<T>& grad, std::size_t cols) const;

  OptimConfig config_;
  Curvature K_;
  std::size_t steps_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace hybo::train
