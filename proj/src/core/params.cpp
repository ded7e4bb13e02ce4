#include "hybo/nn/params.hpp"

#include <stdexcept>

namespace hybo::nn {

template <typename T>
ParamId ParameterStore<T>::add(std::string name, Tensor<T> init, ParamKind kind) {
  if (by_name_.count(name) != 0) throw std::invalid_argument("duplicate parameter name: " + name);
  if (kind == ParamKind::lorentz_rows && init.ndim() != 2) {
    throw std::invalid_argument("lorentz_rows parameter must be a matrix: " + name);
  }
  by_name_[name] = entries_.size();
  entries_.push_back(Entry{std::move(name), init.detach(), kind});
  return ParamId{entries_.size() - 1};
}

template <typename T>
std::optional<ParamId> ParameterStore<T>::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return ParamId{it->second};
}

template <typename T>
std::size_t ParameterStore<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

template <typename T>
Bound<T>::Bound(const ParameterStore<T>& store, Tape<T>* tape)
    : store_(&store), tape_(tape), watched_(store.size()) {}

template <typename T>
const Tensor<T>& Bound<T>::operator[](ParamId id) {
  auto& slot = watched_.at(id.index);
  if (!slot) {
    const auto& v = store_->value(id);
    slot = tape_ != nullptr ? tape_->watch(v) : v;
  }
  return *slot;
}

template <typename T>
void Bound<T>::bind(ParamId id, Tensor<T> value) {
  if (value.shape() != store_->value(id).shape()) {
    throw std::invalid_argument("bind: shape mismatch for " + store_->entry(id.index).name);
  }
  watched_.at(id.index) = std::move(value);
}

template <typename T>
std::vector<std::vector<T>> Bound<T>::gradients() const {
  std::vector<std::vector<T>> out;
  out.reserve(watched_.size());
  for (std::size_t i = 0; i < watched_.size(); ++i) {
    if (watched_[i] && tape_ != nullptr) {
      out.push_back(tape_->grad(*watched_[i]));
    } else {
      out.emplace_back(store_->entry(i).value.numel(), T(0));
    }
  }
  return out;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class Bound<float>;
template class Bound<double>;

}  // namespace hybo::nn
