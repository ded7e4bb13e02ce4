#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "hybo/ad/tensor.hpp"

namespace hybo::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  // Elements skipped because a clamp_min branch flips within 10h of them.
  std::size_t skipped = 0;
  bool has_nan = false;
  bool passed = true;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

// Compares the taped gradient of scalar-valued `f` at `x` against central
// differences (f(x+h) - f(x-h)) / 2h. The error per element is
// |a - n| / max(1, |a|, |n|). `f` must be deterministic, so any dropout it
// applies has to reseed its generator on each call.
template <typename T>
GradCheckReport finite_difference_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                                        T h, T tolerance);

}  // namespace hybo::ad
