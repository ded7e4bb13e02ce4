#pragma once

// Dense row-major tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a value: shape plus a shared, copy-on-write scalar buffer. When
// it was produced on a Tape it additionally carries the tape pointer and its
// node index. Operations whose inputs are all untracked run eagerly and
// record nothing; operations touching at least one tracked input append one
// node to that input's tape.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hybo::ad {

using Shape = std::vector<std::size_t>;
using NodeId = std::int64_t;
inline constexpr NodeId kNoNode = -1;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

template <typename T>
class Tape;

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : Tensor(Shape{1}, std::vector<T>{T(0)}) {}
  Tensor(Shape shape, std::vector<T> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor scalar(T value) { return Tensor(Shape{1}, {value}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<T> values) {
    return Tensor(Shape{rows, cols}, std::move(values));
  }
  static Tensor column(std::vector<T> values) {
    const std::size_t n = values.size();
    return Tensor(Shape{n, 1}, std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t numel() const noexcept { return data_->size(); }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t rows() const { return shape_.front(); }
  std::size_t cols() const { return shape_.back(); }

  std::span<const T> values() const noexcept { return {data_->data(), data_->size()}; }
  std::vector<T> to_vector() const { return *data_; }
  T item() const;
  T operator[](std::size_t i) const { return (*data_)[i]; }
  T at(std::size_t r, std::size_t c) const { return (*data_)[r * shape_.back() + c]; }

  // Mutable access for untracked tensors (parameter updates). Copies the
  // buffer first when it is shared with another Tensor.
  std::span<T> mutable_values();

  bool requires_grad() const noexcept { return tape_ != nullptr; }
  Tape<T>* tape() const noexcept { return tape_; }
  NodeId node() const noexcept { return node_; }

  // Same values, no tape association.
  Tensor detach() const;

 private:
  friend class Tape<T>;

  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
  Tape<T>* tape_ = nullptr;
  NodeId node_ = kNoNode;
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(std::span<const T> grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `value` as a leaf and returns the tracked handle.
  Tensor<T> watch(const Tensor<T>& value);

  // Appends an interior node. `backward` receives d(root)/d(output) and
  // must push contributions to its inputs through accumulate().
  Tensor<T> record(std::string_view op, Shape shape, std::vector<T> values,
                   std::vector<NodeId> inputs, Backward backward);

  // Reverse sweep from a one-element root. Each recorded node is visited at
  // most once, in reverse creation order.
  void backward(const Tensor<T>& root);

  // d(root)/d(t) after backward(); zero-filled when `t` did not participate.
  std::vector<T> grad(const Tensor<T>& t) const;

  void accumulate(const Tensor<T>& input, std::span<const T> g);

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t allocated_grad_slots() const;
  const std::string& op_name(NodeId id) const { return nodes_.at(id).op; }
  const std::vector<NodeId>& inputs_of(NodeId id) const { return nodes_.at(id).inputs; }

 private:
  struct Node {
    std::string op;
    std::size_t numel = 0;
    std::vector<NodeId> inputs;
    Backward backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<T>> grads_;
};

// ---- primitives -----------------------------------------------------------
// Binary ops accept equal shapes, or one operand with a single element.

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> neg(const Tensor<T>& a);

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
// Reduction over the last axis, keeping it with extent 1.
template <typename T> Tensor<T> sum_last(const Tensor<T>& a);
// Euclidean norm over the last axis, keeping it with extent 1.
template <typename T> Tensor<T> norm2_last(const Tensor<T>& a);

template <typename T> Tensor<T> concat_last(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> slice_last(const Tensor<T>& a, std::size_t begin, std::size_t end);
// Repeats a trailing extent-1 axis `width` times.
template <typename T> Tensor<T> broadcast_last(const Tensor<T>& a, std::size_t width);
// Rows of a 2-D table selected by index (embedding lookup).
template <typename T> Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> rows);

template <typename T> Tensor<T> sqrt(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> log(const Tensor<T>& a);
template <typename T> Tensor<T> cosh(const Tensor<T>& a);
template <typename T> Tensor<T> sinh(const Tensor<T>& a);
// Inputs below 1 raise DomainError; inputs in [1, 1 + arcosh_clamp<T>()) are
// evaluated at the clamp and pass zero gradient.
template <typename T> Tensor<T> arcosh(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> log_sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> softmax_last(const Tensor<T>& a);
template <typename T> Tensor<T> log_softmax_last(const Tensor<T>& a);
// Gradient 1 where a > threshold, 0 elsewhere.
template <typename T> Tensor<T> clamp_min(const Tensor<T>& a, T threshold);
template <typename T> Tensor<T> relu(const Tensor<T>& a) { return clamp_min(a, T(0)); }
// Inverted dropout: kept entries are scaled by 1 / (1 - p). The mask is
// stored on the node. p == 0 returns `a` unchanged.
template <typename T> Tensor<T> dropout(const Tensor<T>& a, T p, std::mt19937_64& rng);

template <typename T>
constexpr T arcosh_clamp() {
  return sizeof(T) >= 8 ? T(1e-12) : T(1e-6);
}

// Records clamp_min branch decisions while active on the current thread. The
// gradient checker uses it to detect kinks between two evaluations.
class KinkProbe {
 public:
  KinkProbe();
  ~KinkProbe();
  KinkProbe(const KinkProbe&) = delete;
  KinkProbe& operator=(const KinkProbe&) = delete;

  const std::vector<bool>& decisions() const noexcept { return decisions_; }
  static void record(bool above);

 private:
  KinkProbe* previous_;
  std::vector<bool> decisions_;
};

// ---- operator sugar -------------------------------------------------------

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a) { return neg(a); }

template <typename T> Tensor<T> operator+(const Tensor<T>& a, T b) { return add(a, Tensor<T>::scalar(b)); }
template <typename T> Tensor<T> operator+(T a, const Tensor<T>& b) { return add(Tensor<T>::scalar(a), b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, T b) { return sub(a, Tensor<T>::scalar(b)); }
template <typename T> Tensor<T> operator-(T a, const Tensor<T>& b) { return sub(Tensor<T>::scalar(a), b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, T b) { return mul(a, Tensor<T>::scalar(b)); }
template <typename T> Tensor<T> operator*(T a, const Tensor<T>& b) { return mul(Tensor<T>::scalar(a), b); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, T b) { return div(a, Tensor<T>::scalar(b)); }
template <typename T> Tensor<T> operator/(T a, const Tensor<T>& b) { return div(Tensor<T>::scalar(a), b); }

}  // namespace hybo::ad
