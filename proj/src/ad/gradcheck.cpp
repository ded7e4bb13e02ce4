#include "hybo/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hybo::ad {

namespace {

template <typename T>
Tensor<T> perturbed(const Tensor<T>& x, std::size_t i, T delta) {
  Tensor<T> y = x.detach();
  auto v = y.mutable_values();
  v[i] += delta;
  return y;
}

template <typename T>
std::vector<bool> kink_signature(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x) {
  KinkProbe probe;
  (void)f(x);
  return probe.decisions();
}

}  // namespace

template <typename T>
GradCheckReport finite_difference_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                                        T h, T tolerance) {
  if (!(h > T(0)) || h > T(1e-3)) throw std::invalid_argument("finite_difference_check: h must lie in (0, 1e-3]");

  GradCheckReport report;
  Tape<T> tape;
  const Tensor<T> leaf = tape.watch(x.detach());
  const Tensor<T> y = f(leaf);
  if (y.tape() == &tape) tape.backward(y);
  const std::vector<T> analytic = tape.grad(leaf);

  report.analytic.resize(x.numel());
  report.numeric.resize(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T margin = T(10) * h;
    if (kink_signature(f, perturbed(x.detach(), i, -margin)) != kink_signature(f, perturbed(x.detach(), i, margin))) {
      ++report.skipped;
      report.analytic[i] = static_cast<double>(analytic[i]);
      report.numeric[i] = std::nan("");
      continue;
    }
    const T fp = f(perturbed(x.detach(), i, h)).item();
    const T fm = f(perturbed(x.detach(), i, -h)).item();
    const double numeric = (static_cast<double>(fp) - static_cast<double>(fm)) / (2.0 * static_cast<double>(h));
    const double a = static_cast<double>(analytic[i]);
    report.analytic[i] = a;
    report.numeric[i] = numeric;
    ++report.checked;
    if (std::isnan(a) || std::isnan(numeric)) {
      report.has_nan = true;
      report.passed = false;
      report.max_rel_error = std::numeric_limits<double>::infinity();
      report.worst_index = i;
      continue;
    }
    const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = i;
    }
  }
  if (report.max_rel_error >= static_cast<double>(tolerance)) report.passed = false;
  return report;
}

template GradCheckReport finite_difference_check<float>(const std::function<Tensor<float>(const Tensor<float>&)>&,
                                                        const Tensor<float>&, float, float);
template GradCheckReport finite_difference_check<double>(const std::function<Tensor<double>(const Tensor<double>&)>&,
                                                         const Tensor<double>&, double, double);

}  // namespace hybo::ad
