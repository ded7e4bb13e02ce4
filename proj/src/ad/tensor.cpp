#include "hybo/ad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace hybo::ad {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<T>>(std::move(values))) {
  if (shape_.empty()) throw ShapeError("tensor: shape must have at least one axis");
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape_));
  }
  if (shape_numel(shape_) != data_->size()) {
    throw ShapeError("tensor: shape " + shape_str(shape_) + " does not match buffer of " +
                     std::to_string(data_->size()) + " elements");
  }
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, T(0)));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value));
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape_) + " is not a scalar");
  return (*data_)[0];
}

template <typename T>
std::span<T> Tensor<T>::mutable_values() {
  if (tape_ != nullptr) throw std::logic_error("mutable_values: tensor is tracked by a tape");
  if (data_.use_count() > 1) data_ = std::make_shared<std::vector<T>>(*data_);
  return {data_->data(), data_->size()};
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  Tensor out;
  out.shape_ = shape_;
  out.data_ = data_;
  return out;
}

// ---------------------------------------------------------------------------
// Tape

template <typename T>
Tensor<T> Tape<T>::watch(const Tensor<T>& value) {
  return record("leaf", value.shape(), value.to_vector(), {}, nullptr);
}

template <typename T>
Tensor<T> Tape<T>::record(std::string_view op, Shape shape, std::vector<T> values,
                          std::vector<NodeId> inputs, Backward backward) {
  Tensor<T> out(std::move(shape), std::move(values));
  out.tape_ = this;
  out.node_ = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{std::string(op), out.numel(), std::move(inputs), std::move(backward)});
  return out;
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& root) {
  if (root.tape() != this) throw std::invalid_argument("backward: root was not recorded on this tape");
  if (root.numel() != 1) {
    throw ShapeError("backward: root must have exactly one element, got shape " + shape_str(root.shape()));
  }
  grads_.assign(nodes_.size(), {});
  grads_[root.node()] = {T(1)};
  for (NodeId id = root.node(); id >= 0; --id) {
    auto& node = nodes_[id];
    if (grads_[id].empty() || !node.backward) continue;
    node.backward(std::span<const T>(grads_[id]), *this);
  }
}

template <typename T>
std::vector<T> Tape<T>::grad(const Tensor<T>& t) const {
  if (t.tape() == this && t.node() >= 0 && static_cast<std::size_t>(t.node()) < grads_.size() &&
      !grads_[t.node()].empty()) {
    return grads_[t.node()];
  }
  return std::vector<T>(t.numel(), T(0));
}

template <typename T>
void Tape<T>::accumulate(const Tensor<T>& input, std::span<const T> g) {
  if (input.tape() != this) return;
  auto& slot = grads_[input.node()];
  if (slot.empty()) slot.assign(input.numel(), T(0));
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
}

template <typename T>
std::size_t Tape<T>::allocated_grad_slots() const {
  return static_cast<std::size_t>(
      std::count_if(grads_.begin(), grads_.end(), [](const auto& g) { return !g.empty(); }));
}

// ---------------------------------------------------------------------------
// Kink probe

namespace {
thread_local KinkProbe* active_probe = nullptr;
}

KinkProbe::KinkProbe() : previous_(active_probe) { active_probe = this; }
KinkProbe::~KinkProbe() { active_probe = previous_; }
void KinkProbe::record(bool above) {
  if (active_probe != nullptr) active_probe->decisions_.push_back(above);
}

// ---------------------------------------------------------------------------
// Primitive helpers

namespace {

template <typename T>
Tape<T>* common_tape(std::string_view op, std::initializer_list<const Tensor<T>*> inputs) {
  Tape<T>* tape = nullptr;
  for (const auto* t : inputs) {
    if (t->tape() == nullptr) continue;
    if (tape != nullptr && tape != t->tape()) {
      throw std::invalid_argument(std::string(op) + ": inputs belong to different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

template <typename T>
Tensor<T> finish(std::string_view op, Shape shape, std::vector<T> values,
                 std::initializer_list<const Tensor<T>*> inputs, typename Tape<T>::Backward backward) {
  Tape<T>* tape = common_tape<T>(op, inputs);
  if (tape == nullptr) return Tensor<T>(std::move(shape), std::move(values));
  std::vector<NodeId> ids;
  for (const auto* t : inputs) ids.push_back(t->node());
  return tape->record(op, std::move(shape), std::move(values), std::move(ids), std::move(backward));
}

[[noreturn]] void mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

std::size_t last_extent(const Shape& s) { return s.back(); }

// Elementwise binary op with scalar broadcasting. `fa`/`fb` return the
// partial derivatives w.r.t. each operand given (a_i, b_i, out_i).
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(std::string_view op, const Tensor<T>& a, const Tensor<T>& b, F f, DA da, DB db) {
  const bool a_scalar = a.numel() == 1;
  const bool b_scalar = b.numel() == 1;
  Shape shape;
  if (a.shape() == b.shape()) {
    shape = a.shape();
  } else if (b_scalar && (!a_scalar || a.ndim() >= b.ndim())) {
    shape = a.shape();
  } else if (a_scalar) {
    shape = b.shape();
  } else {
    mismatch(op, a.shape(), b.shape());
  }
  const std::size_t n = shape_numel(shape);
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t sa = a.numel() == n ? 1 : 0;
  const std::size_t sb = b.numel() == n ? 1 : 0;
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i * sa], bv[i * sb]);
  auto saved = std::make_shared<std::vector<T>>(out);
  return finish<T>(op, shape, std::move(out), {&a, &b},
                   [a, b, saved, n, sa, sb, da, db](std::span<const T> g, Tape<T>& tape) {
                     const auto av = a.values();
                     const auto bv = b.values();
                     const auto& o = *saved;
                     if (a.requires_grad()) {
                       std::vector<T> ga(a.numel(), T(0));
                       for (std::size_t i = 0; i < n; ++i) ga[i * sa] += g[i] * da(av[i * sa], bv[i * sb], o[i]);
                       tape.accumulate(a, ga);
                     }
                     if (b.requires_grad()) {
                       std::vector<T> gb(b.numel(), T(0));
                       for (std::size_t i = 0; i < n; ++i) gb[i * sb] += g[i] * db(av[i * sa], bv[i * sb], o[i]);
                       tape.accumulate(b, gb);
                     }
                   });
}

// Elementwise unary op; `df(x, y)` is dy/dx.
template <typename T, typename F, typename DF>
Tensor<T> unary(std::string_view op, const Tensor<T>& a, F f, DF df) {
  const auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  auto saved = std::make_shared<std::vector<T>>(out);
  return finish<T>(op, a.shape(), std::move(out), {&a}, [a, saved, df](std::span<const T> g, Tape<T>& tape) {
    const auto av = a.values();
    std::vector<T> ga(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) ga[i] = g[i] * df(av[i], (*saved)[i]);
    tape.accumulate(a, ga);
  });
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Arithmetic

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; }, [](T x, T, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
      [](T, T y, T o) { return -o / y; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return unary<T>("neg", a, [](T x) { return -x; }, [](T, T) { return T(-1); });
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0]) mismatch("matmul", a.shape(), b.shape());
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      if (aip == T(0)) continue;
      const T* brow = bv.data() + p * n;
      T* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return finish<T>("matmul", {m, n}, std::move(out), {&a, &b}, [a, b, m, k, n](std::span<const T> g, Tape<T>& tape) {
    const auto av = a.values();
    const auto bv = b.values();
    if (a.requires_grad()) {
      // dA = G B^T
      std::vector<T> ga(m * k, T(0));
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          T acc = T(0);
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] = acc;
        }
      }
      tape.accumulate(a, ga);
    }
    if (b.requires_grad()) {
      // dB = A^T G
      std::vector<T> gb(k * n, T(0));
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = av[i * k + p];
          if (aip == T(0)) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
      }
      tape.accumulate(b, gb);
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.ndim() != 2) throw ShapeError("transpose: expected a matrix, got " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  const auto av = a.values();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return finish<T>("transpose", {n, m}, std::move(out), {&a}, [a, m, n](std::span<const T> g, Tape<T>& tape) {
    std::vector<T> ga(m * n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] = g[j * m + i];
    tape.accumulate(a, ga);
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  const auto av = a.values();
  T total = T(0);
  for (T x : av) total += x;
  return finish<T>("sum", {1}, {total}, {&a}, [a](std::span<const T> g, Tape<T>& tape) {
    tape.accumulate(a, std::vector<T>(a.numel(), g[0]));
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  const auto av = a.values();
  T total = T(0);
  for (T x : av) total += x;
  const T n = static_cast<T>(av.size());
  return finish<T>("mean", {1}, {total / n}, {&a}, [a, n](std::span<const T> g, Tape<T>& tape) {
    tape.accumulate(a, std::vector<T>(a.numel(), g[0] / n));
  });
}

template <typename T>
Tensor<T> sum_last(const Tensor<T>& a) {
  const std::size_t inner = last_extent(a.shape());
  const std::size_t outer = a.numel() / inner;
  const auto av = a.values();
  std::vector<T> out(outer, T(0));
  for (std::size_t r = 0; r < outer; ++r)
    for (std::size_t c = 0; c < inner; ++c) out[r] += av[r * inner + c];
  Shape shape = a.shape();
  shape.back() = 1;
  return finish<T>("sum_last", shape, std::move(out), {&a}, [a, inner, outer](std::span<const T> g, Tape<T>& tape) {
    std::vector<T> ga(a.numel());
    for (std::size_t r = 0; r < outer; ++r)
      for (std::size_t c = 0; c < inner; ++c) ga[r * inner + c] = g[r];
    tape.accumulate(a, ga);
  });
}

template <typename T>
Tensor<T> norm2_last(const Tensor<T>& a) {
  const std::size_t inner = last_extent(a.shape());
  const std::size_t outer = a.numel() / inner;
  const auto av = a.values();
  std::vector<T> out(outer, T(0));
  for (std::size_t r = 0; r < outer; ++r) {
    T acc = T(0);
    for (std::size_t c = 0; c < inner; ++c) acc += av[r * inner + c] * av[r * inner + c];
    out[r] = std::sqrt(acc);
  }
  auto saved = std::make_shared<std::vector<T>>(out);
  Shape shape = a.shape();
  shape.back() = 1;
  return finish<T>("norm2_last", shape, std::move(out), {&a},
                   [a, saved, inner, outer](std::span<const T> g, Tape<T>& tape) {
                     const auto av = a.values();
                     std::vector<T> ga(a.numel(), T(0));
                     for (std::size_t r = 0; r < outer; ++r) {
                       const T nr = (*saved)[r];
                       if (nr == T(0)) continue;
                       for (std::size_t c = 0; c < inner; ++c) ga[r * inner + c] = g[r] * av[r * inner + c] / nr;
                     }
                     tape.accumulate(a, ga);
                   });
}

// ---------------------------------------------------------------------------
// Layout

template <typename T>
Tensor<T> concat_last(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_last: no inputs");
  Shape lead = parts.front().shape();
  lead.pop_back();
  std::size_t width = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    Shape l = p.shape();
    l.pop_back();
    if (l != lead) mismatch("concat_last", parts.front().shape(), p.shape());
    widths.push_back(p.shape().back());
    width += p.shape().back();
  }
  const std::size_t outer = shape_numel(lead);
  std::vector<T> out(outer * width);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].values();
    for (std::size_t r = 0; r < outer; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c) out[r * width + offset + c] = pv[r * widths[k] + c];
    offset += widths[k];
  }
  Shape shape = lead;
  shape.push_back(width);

  Tape<T>* tape = nullptr;
  for (const auto& p : parts) {
    if (p.tape() == nullptr) continue;
    if (tape != nullptr && tape != p.tape()) throw std::invalid_argument("concat_last: inputs belong to different tapes");
    tape = p.tape();
  }
  if (tape == nullptr) return Tensor<T>(shape, std::move(out));
  std::vector<NodeId> ids;
  for (const auto& p : parts) ids.push_back(p.node());
  return tape->record("concat_last", shape, std::move(out), std::move(ids),
                      [parts, widths, width, outer](std::span<const T> g, Tape<T>& tp) {
                        std::size_t offset = 0;
                        for (std::size_t k = 0; k < parts.size(); ++k) {
                          if (parts[k].requires_grad()) {
                            std::vector<T> gp(outer * widths[k]);
                            for (std::size_t r = 0; r < outer; ++r)
                              for (std::size_t c = 0; c < widths[k]; ++c)
                                gp[r * widths[k] + c] = g[r * width + offset + c];
                            tp.accumulate(parts[k], gp);
                          }
                          offset += widths[k];
                        }
                      });
}

template <typename T>
Tensor<T> slice_last(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  const std::size_t inner = last_extent(a.shape());
  if (begin >= end || end > inner) {
    throw ShapeError("slice_last: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for shape " + shape_str(a.shape()));
  }
  const std::size_t outer = a.numel() / inner;
  const std::size_t w = end - begin;
  const auto av = a.values();
  std::vector<T> out(outer * w);
  for (std::size_t r = 0; r < outer; ++r)
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = av[r * inner + begin + c];
  Shape shape = a.shape();
  shape.back() = w;
  return finish<T>("slice_last", shape, std::move(out), {&a},
                   [a, inner, outer, w, begin](std::span<const T> g, Tape<T>& tape) {
                     std::vector<T> ga(a.numel(), T(0));
                     for (std::size_t r = 0; r < outer; ++r)
                       for (std::size_t c = 0; c < w; ++c) ga[r * inner + begin + c] = g[r * w + c];
                     tape.accumulate(a, ga);
                   });
}

template <typename T>
Tensor<T> broadcast_last(const Tensor<T>& a, std::size_t width) {
  if (a.shape().back() != 1) throw ShapeError("broadcast_last: last axis must be 1, got " + shape_str(a.shape()));
  if (width == 0) throw ShapeError("broadcast_last: width must be positive");
  const std::size_t outer = a.numel();
  const auto av = a.values();
  std::vector<T> out(outer * width);
  for (std::size_t r = 0; r < outer; ++r)
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = av[r];
  Shape shape = a.shape();
  shape.back() = width;
  return finish<T>("broadcast_last", shape, std::move(out), {&a},
                   [a, outer, width](std::span<const T> g, Tape<T>& tape) {
                     std::vector<T> ga(outer, T(0));
                     for (std::size_t r = 0; r < outer; ++r)
                       for (std::size_t c = 0; c < width; ++c) ga[r] += g[r * width + c];
                     tape.accumulate(a, ga);
                   });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> rows) {
  if (table.ndim() != 2) throw ShapeError("gather_rows: expected a matrix, got " + shape_str(table.shape()));
  if (rows.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t n = table.shape()[0], w = table.shape()[1];
  const auto tv = table.values();
  std::vector<T> out(rows.size() * w);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw std::out_of_range("gather_rows: index " + std::to_string(rows[i]) + " out of range for " +
                              std::to_string(n) + " rows");
    }
    std::copy_n(tv.data() + rows[i] * w, w, out.data() + i * w);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return finish<T>("gather_rows", {rows.size(), w}, std::move(out), {&table},
                   [table, idx, w](std::span<const T> g, Tape<T>& tape) {
                     std::vector<T> gt(table.numel(), T(0));
                     for (std::size_t i = 0; i < idx.size(); ++i)
                       for (std::size_t c = 0; c < w; ++c) gt[idx[i] * w + c] += g[i * w + c];
                     tape.accumulate(table, gt);
                   });
}

// ---------------------------------------------------------------------------
// Elementwise functions

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  return unary<T>("sqrt", a, [](T x) { return std::sqrt(x); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary<T>("square", a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary<T>("exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  return unary<T>("log", a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Tensor<T> cosh(const Tensor<T>& a) {
  return unary<T>("cosh", a, [](T x) { return std::cosh(x); }, [](T x, T) { return std::sinh(x); });
}

template <typename T>
Tensor<T> sinh(const Tensor<T>& a) {
  return unary<T>("sinh", a, [](T x) { return std::sinh(x); }, [](T x, T) { return std::cosh(x); });
}

template <typename T>
Tensor<T> arcosh(const Tensor<T>& a) {
  constexpr T lo = T(1) + arcosh_clamp<T>();
  for (T x : a.values()) {
    if (!(x >= T(1))) {
      throw DomainError("arcosh: input " + std::to_string(static_cast<double>(x)) + " is below 1");
    }
  }
  return unary<T>(
      "arcosh", a, [lo](T x) { return std::acosh(std::max(x, lo)); },
      [lo](T x, T) { return x < lo ? T(0) : T(1) / std::sqrt((x - T(1)) * (x + T(1))); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary<T>("sigmoid", a, [](T x) { return stable_sigmoid(x); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> log_sigmoid(const Tensor<T>& a) {
  return unary<T>(
      "log_sigmoid", a, [](T x) { return std::min(x, T(0)) - std::log1p(std::exp(-std::abs(x))); },
      [](T x, T) { return stable_sigmoid(-x); });
}

template <typename T>
Tensor<T> softmax_last(const Tensor<T>& a) {
  const std::size_t inner = last_extent(a.shape());
  const std::size_t outer = a.numel() / inner;
  const auto av = a.values();
  std::vector<T> out(a.numel());
  for (std::size_t r = 0; r < outer; ++r) {
    const T* row = av.data() + r * inner;
    const T mx = *std::max_element(row, row + inner);
    T z = T(0);
    for (std::size_t c = 0; c < inner; ++c) {
      out[r * inner + c] = std::exp(row[c] - mx);
      z += out[r * inner + c];
    }
    for (std::size_t c = 0; c < inner; ++c) out[r * inner + c] /= z;
  }
  auto saved = std::make_shared<std::vector<T>>(out);
  return finish<T>("softmax_last", a.shape(), std::move(out), {&a},
                   [a, saved, inner, outer](std::span<const T> g, Tape<T>& tape) {
                     const auto& y = *saved;
                     std::vector<T> ga(a.numel());
                     for (std::size_t r = 0; r < outer; ++r) {
                       T dot = T(0);
                       for (std::size_t c = 0; c < inner; ++c) dot += g[r * inner + c] * y[r * inner + c];
                       for (std::size_t c = 0; c < inner; ++c)
                         ga[r * inner + c] = y[r * inner + c] * (g[r * inner + c] - dot);
                     }
                     tape.accumulate(a, ga);
                   });
}

template <typename T>
Tensor<T> log_softmax_last(const Tensor<T>& a) {
  const std::size_t inner = last_extent(a.shape());
  const std::size_t outer = a.numel() / inner;
  const auto av = a.values();
  std::vector<T> out(a.numel());
  for (std::size_t r = 0; r < outer; ++r) {
    const T* row = av.data() + r * inner;
    const T mx = *std::max_element(row, row + inner);
    T z = T(0);
    for (std::size_t c = 0; c < inner; ++c) z += std::exp(row[c] - mx);
    const T lz = mx + std::log(z);
    for (std::size_t c = 0; c < inner; ++c) out[r * inner + c] = row[c] - lz;
  }
  auto saved = std::make_shared<std::vector<T>>(out);
  return finish<T>("log_softmax_last", a.shape(), std::move(out), {&a},
                   [a, saved, inner, outer](std::span<const T> g, Tape<T>& tape) {
                     const auto& y = *saved;
                     std::vector<T> ga(a.numel());
                     for (std::size_t r = 0; r < outer; ++r) {
                       T gs = T(0);
                       for (std::size_t c = 0; c < inner; ++c) gs += g[r * inner + c];
                       for (std::size_t c = 0; c < inner; ++c)
                         ga[r * inner + c] = g[r * inner + c] - std::exp(y[r * inner + c]) * gs;
                     }
                     tape.accumulate(a, ga);
                   });
}

template <typename T>
Tensor<T> clamp_min(const Tensor<T>& a, T threshold) {
  for (T x : a.values()) KinkProbe::record(x > threshold);
  return unary<T>(
      "clamp_min", a, [threshold](T x) { return std::max(x, threshold); },
      [threshold](T x, T) { return x > threshold ? T(1) : T(0); });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& a, T p, std::mt19937_64& rng) {
  if (p < T(0) || p >= T(1)) throw std::invalid_argument("dropout: probability must lie in [0, 1)");
  if (p == T(0)) return a;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const T scale = T(1) / (T(1) - p);
  auto mask = std::make_shared<std::vector<T>>(a.numel());
  for (auto& m : *mask) m = keep(rng) ? scale : T(0);
  const auto av = a.values();
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * (*mask)[i];
  return finish<T>("dropout", a.shape(), std::move(out), {&a}, [a, mask](std::span<const T> g, Tape<T>& tape) {
    std::vector<T> ga(a.numel());
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = g[i] * (*mask)[i];
    tape.accumulate(a, ga);
  });
}

// ---------------------------------------------------------------------------
// Instantiations

#define HYBO_INSTANTIATE(T)                                                                   \
  template class Tensor<T>;                                                                   \
  template class Tape<T>;                                                                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> neg(const Tensor<T>&);                                                   \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> transpose(const Tensor<T>&);                                             \
  template Tensor<T> sum(const Tensor<T>&);                                                   \
  template Tensor<T> mean(const Tensor<T>&);                                                  \
  template Tensor<T> sum_last(const Tensor<T>&);                                              \
  template Tensor<T> norm2_last(const Tensor<T>&);                                            \
  template Tensor<T> concat_last(const std::vector<Tensor<T>>&);                              \
  template Tensor<T> slice_last(const Tensor<T>&, std::size_t, std::size_t);                  \
  template Tensor<T> broadcast_last(const Tensor<T>&, std::size_t);                           \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);             \
  template Tensor<T> sqrt(const Tensor<T>&);                                                  \
  template Tensor<T> square(const Tensor<T>&);                                                \
  template Tensor<T> exp(const Tensor<T>&);                                                   \
  template Tensor<T> log(const Tensor<T>&);                                                   \
  template Tensor<T> cosh(const Tensor<T>&);                                                  \
  template Tensor<T> sinh(const Tensor<T>&);                                                  \
  template Tensor<T> arcosh(const Tensor<T>&);                                                \
  template Tensor<T> sigmoid(const Tensor<T>&);                                               \
  template Tensor<T> log_sigmoid(const Tensor<T>&);                                           \
  template Tensor<T> softmax_last(const Tensor<T>&);                                          \
  template Tensor<T> log_softmax_last(const Tensor<T>&);                                      \
  template Tensor<T> clamp_min(const Tensor<T>&, T);                                          \
  template Tensor<T> dropout(const Tensor<T>&, T, std::mt19937_64&);

HYBO_INSTANTIATE(float)
HYBO_INSTANTIATE(double)

#undef HYBO_INSTANTIATE

}  // namespace hybo::ad
