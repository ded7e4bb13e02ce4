#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybo/ad/tensor.hpp"

namespace hybo::nn {

using ad::Tape;
using ad::Tensor;

enum class ParamKind {
  // Ordinary Euclidean parameter.
  euclidean,
  // Matrix whose rows are the spatial parts of Lorentz points; the time
  // coordinate is recomputed on use.
  lorentz_rows,
};

struct ParamId {
  std::size_t index = 0;
};

template <typename T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    ParamKind kind = ParamKind::euclidean;
  };

  ParamId add(std::string name, Tensor<T> init, ParamKind kind = ParamKind::euclidean);

  const Tensor<T>& value(ParamId id) const { return entries_.at(id.index).value; }
  Tensor<T>& value(ParamId id) { return entries_.at(id.index).value; }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  Entry& entry(std::size_t i) { return entries_.at(i); }
  std::size_t size() const noexcept { return entries_.size(); }
  std::optional<ParamId> find(const std::string& name) const;
  std::size_t total_elements() const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> by_name_;
};

// Parameters as seen by one forward pass. With a tape, each parameter is
// watched on first use; without one, raw values are returned.
template <typename T>
class Bound {
 public:
  explicit Bound(const ParameterStore<T>& store, Tape<T>* tape = nullptr);

  const Tensor<T>& operator[](ParamId id);
  // Uses `value` in place of the stored parameter for this pass.
  void bind(ParamId id, Tensor<T> value);
  Tape<T>* tape() const noexcept { return tape_; }
  const ParameterStore<T>& store() const noexcept { return *store_; }

  // Gradients per parameter after tape->backward(); untouched parameters
  // yield zero-filled buffers.
  std::vector<std::vector<T>> gradients() const;

 private:
  const ParameterStore<T>* store_;
  Tape<T>* tape_;
  std::vector<std::optional<Tensor<T>>> watched_;
};

}  // namespace hybo::nn
