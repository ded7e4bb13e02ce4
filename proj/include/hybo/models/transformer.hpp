#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "hybo/nn/layers.hpp"

namespace hybo::models {

using nn::Bound;
using nn::Curvature;
using nn::ParamId;
using nn::ParameterStore;
using nn::Tensor;

struct TransformerConfig {
  std::size_t vocab = 9;  // including any mask token
  std::size_t max_len = 8;
  std::size_t dim = 16;   // spatial dimension of every point
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t ff_dim = 32;
  double dropout = 0.0;
  double embed_scale = 0.5;
};

// Encoder: token embedding, position encoding through one shared residual
// layer, then `layers` blocks of (multi-head attention, residual) and
// (feed-forward, residual). Sequences in a batch are laid out as consecutive
// rows and kept apart by a block-diagonal attention mask.
template <typename T>
class ToyTransformer {
 public:
  static ToyTransformer create(ParameterStore<T>& store, const TransformerConfig& config, std::mt19937_64& rng,
                               Curvature K = Curvature());

  // Points for every position of every sequence, [sum(len), dim+1]. With
  // `trace`, every intermediate representation is appended to it.
  Tensor<T> forward(Bound<T>& params, const std::vector<std::vector<std::uint32_t>>& batch,
                    std::mt19937_64* dropout_rng = nullptr, std::vector<Tensor<T>>* trace = nullptr) const;

  // -d2(point, output embedding) for every vocabulary item, [rows, vocab].
  Tensor<T> logits(Bound<T>& params, const Tensor<T>& points) const;

  // Mean cross-entropy over the selected rows of `points` against `targets`.
  Tensor<T> loss(Bound<T>& params, const Tensor<T>& points, const std::vector<std::size_t>& rows,
                 const std::vector<std::uint32_t>& targets) const;

  const TransformerConfig& config() const noexcept { return config_; }
  Curvature curvature() const noexcept { return K_; }

 private:
  struct Block {
    nn::MultiHeadAttention<T> attention;
    nn::LorentzLinear<T> attention_residual;
    nn::LorentzLinear<T> ff_in;
    nn::LorentzLinear<T> ff_residual;
  };

  TransformerConfig config_;
  Curvature K_;
  ParamId tokens_, positions_, outputs_;
  nn::LorentzLinear<T> position_encoder_;
  std::vector<Block> blocks_;
};

}  // namespace hybo::models
