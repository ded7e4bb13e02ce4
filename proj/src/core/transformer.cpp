#include "hybo/models/transformer.hpp"

#include <algorithm>
#include <stdexcept>

namespace hybo::models {

using namespace hybo::ad;

namespace {

template <typename T>
Tensor<T> embedding_table(std::size_t rows, std::size_t cols, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<T> v(rows * cols);
  for (auto& x : v) x = static_cast<T>(d(rng));
  return Tensor<T>({rows, cols}, std::move(v));
}

}  // namespace

template <typename T>
ToyTransformer<T> ToyTransformer<T>::create(ParameterStore<T>& store, const TransformerConfig& config,
                                            std::mt19937_64& rng, Curvature K) {
  if (config.vocab < 2 || config.max_len < 1 || config.dim < 2 || config.heads < 1 || config.ff_dim < 1) {
    throw std::invalid_argument("transformer: invalid configuration");
  }
  ToyTransformer m;
  m.config_ = config;
  m.K_ = K;
  const std::size_t n = config.dim;
  m.tokens_ = store.add("embed.tokens", embedding_table<T>(config.vocab, n, config.embed_scale, rng),
                        nn::ParamKind::lorentz_rows);
  m.positions_ = store.add("embed.positions", embedding_table<T>(config.max_len, n, config.embed_scale, rng),
                           nn::ParamKind::lorentz_rows);
  m.outputs_ = store.add("head.classes", embedding_table<T>(config.vocab, n, config.embed_scale, rng),
                         nn::ParamKind::lorentz_rows);

  nn::LinearOptions base;
  base.dropout = config.dropout;
  base.init_range = 0.2;
  m.position_encoder_ = nn::LorentzLinear<T>::create(store, "embed.position_encoder", n + 1, n, base, rng, K);

  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string prefix = "block" + std::to_string(l);
    nn::AttentionConfig ac;
    ac.heads = config.heads;
    ac.in_features = n + 1;
    ac.head_spatial = std::max<std::size_t>(1, n / config.heads);
    ac.out_spatial = n;
    ac.projection = base;
    ac.output = base;
    nn::LinearOptions relu = base;
    relu.activation = nn::Activation::relu;
    Block b{nn::MultiHeadAttention<T>::create(store, prefix + ".attention", ac, rng, K),
            nn::LorentzLinear<T>::create(store, prefix + ".attention_residual", n + 1, n, base, rng, K),
            nn::LorentzLinear<T>::create(store, prefix + ".ff_in", n + 1, config.ff_dim, base, rng, K),
            nn::LorentzLinear<T>::create(store, prefix + ".ff_residual", config.ff_dim + 1, n, relu, rng, K)};
    m.blocks_.push_back(std::move(b));
  }
  return m;
}

template <typename T>
Tensor<T> ToyTransformer<T>::forward(Bound<T>& params, const std::vector<std::vector<std::uint32_t>>& batch,
                                     std::mt19937_64* dropout_rng, std::vector<Tensor<T>>* trace) const {
  if (batch.empty()) throw std::invalid_argument("transformer: empty batch");
  std::vector<std::size_t> tokens, positions, offsets;
  for (const auto& seq : batch) {
    if (seq.empty() || seq.size() > config_.max_len) {
      throw std::invalid_argument("transformer: sequence length must lie in [1, " + std::to_string(config_.max_len) +
                                  "]");
    }
    offsets.push_back(tokens.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq[i] >= config_.vocab) throw std::out_of_range("transformer: token id " + std::to_string(seq[i]) + " out of vocabulary");
      tokens.push_back(seq[i]);
      positions.push_back(i);
    }
  }
  const std::size_t rows = tokens.size();
  std::vector<T> mask(rows * rows, nn::mask_out<T>());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const std::size_t a = offsets[s], len = batch[s].size();
    for (std::size_t i = a; i < a + len; ++i)
      for (std::size_t j = a; j < a + len; ++j) mask[i * rows + j] = T(0);
  }
  const std::optional<Tensor<T>> attn_mask(Tensor<T>({rows, rows}, std::move(mask)));

  auto record = [&](const Tensor<T>& t) {
    if (trace != nullptr) trace->push_back(t);
  };
  const Tensor<T> words = nn::points_from_spatial(gather_rows(params[tokens_], std::span<const std::size_t>(tokens)), K_);
  const Tensor<T> where = nn::points_from_spatial(gather_rows(params[positions_], std::span<const std::size_t>(positions)), K_);
  record(words);
  record(where);
  Tensor<T> x = position_encoder_.residual(params, words, where, dropout_rng);
  record(x);
  for (const auto& b : blocks_) {
    const Tensor<T> a = b.attention.forward(params, x, x, x, attn_mask, dropout_rng);
    record(a);
    x = b.attention_residual.residual(params, a, x, dropout_rng);
    record(x);
    const Tensor<T> f = b.ff_in.forward(params, x, dropout_rng);
    record(f);
    x = b.ff_residual.residual(params, f, x, dropout_rng);
    record(x);
  }
  return x;
}

template <typename T>
Tensor<T> ToyTransformer<T>::logits(Bound<T>& params, const Tensor<T>& points) const {
  return -nn::sqdist_matrix(points, nn::points_from_spatial(params[outputs_], K_), K_);
}

template <typename T>
Tensor<T> ToyTransformer<T>::loss(Bound<T>& params, const Tensor<T>& points, const std::vector<std::size_t>& rows,
                                  const std::vector<std::uint32_t>& targets) const {
  if (rows.empty() || rows.size() != targets.size()) throw std::invalid_argument("transformer loss: bad targets");
  const Tensor<T> lp = log_softmax_last(logits(params, gather_rows(points, std::span<const std::size_t>(rows))));
  const std::size_t V = config_.vocab;
  std::vector<T> onehot(rows.size() * V, T(0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (targets[i] >= V) throw std::out_of_range("transformer loss: target out of vocabulary");
    onehot[i * V + targets[i]] = T(1);
  }
  return -sum(lp * Tensor<T>({rows.size(), V}, std::move(onehot))) / static_cast<T>(rows.size());
}

template class ToyTransformer<float>;
template class ToyTransformer<double>;

}  // namespace hybo::models
