#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "hybo/data/datasets.hpp"
#include "hybo/nn/layers.hpp"

namespace hybo::models {

using data::Triplet;
using nn::Bound;
using nn::Curvature;
using nn::ParamId;
using nn::ParameterStore;
using nn::Tensor;

enum class RelationTransform {
  fx,      // f_r(e) = [sqrt(|W e|^2 - 1/K); W e], W of shape [n, n+1]
  linear,  // Lorentz linear layer with learnable lambda, no activation
};

struct KgConfig {
  std::size_t dim = 16;  // spatial dimension n
  double margin = 8.0;
  double init_scale = 1e-3;
  RelationTransform transform = RelationTransform::fx;
  double lambda = 2.5;  // linear transform only
};

struct RankMetrics {
  double mrr = 0.0, hits1 = 0.0, hits3 = 0.0, hits10 = 0.0;
  std::size_t queries = 0;
};
RankMetrics summarize_ranks(const std::vector<double>& ranks);

// Rank of the true candidate among `scores` (higher is better), where
// `excluded[c]` removes candidate c; ties count as the mean rank of the
// tied block.
template <typename T>
double tie_aware_rank(const std::vector<T>& scores, std::size_t truth, const std::vector<bool>* excluded = nullptr);

// Negative sampling: for each positive, k corruptions of the head or the tail
// (side uniform), the replacement uniform over all other entities.
std::vector<Triplet> corrupt(const std::vector<Triplet>& positives, std::size_t k, std::size_t num_entities,
                             std::mt19937_64& rng);

template <typename T>
class KgModel {
 public:
  static KgModel create(ParameterStore<T>& store, std::size_t num_entities, std::size_t num_relations,
                        const KgConfig& config, std::mt19937_64& rng, Curvature K = Curvature());

  // Entity points [E, n+1] (time recomputed from the stored spatial rows).
  Tensor<T> entity_points(Bound<T>& params) const;
  // f_r applied to the given points, all under relation r.
  Tensor<T> transform(Bound<T>& params, std::uint32_t relation, const Tensor<T>& points) const;

  // s(h,r,t) = -d2(f_r(e_h), e_t) + b_h + b_t + margin, as [N, 1] in input order.
  Tensor<T> score(Bound<T>& params, const std::vector<Triplet>& triplets) const;
  // Scores of (h, r, c) for every candidate tail c, as [1, E].
  Tensor<T> score_tails(Bound<T>& params, std::uint32_t h, std::uint32_t r) const;

  // -(1/N) sum[log sigma(s+) + sum_j log(1 - sigma(s-_j))], with
  // negatives[i*k .. i*k+k) belonging to positive i.
  Tensor<T> loss(Bound<T>& params, const std::vector<Triplet>& positives, const std::vector<Triplet>& negatives) const;

  // Filtered ranks of the true tail for every triplet (raw when store is null).
  std::vector<double> ranks(Bound<T>& params, const std::vector<Triplet>& queries,
                            const data::TripletStore* filter) const;
  RankMetrics evaluate(Bound<T>& params, const std::vector<Triplet>& queries, const data::TripletStore* filter) const;

  ParamId entities() const noexcept { return entity_; }
  ParamId head_bias() const noexcept { return head_bias_; }
  ParamId tail_bias() const noexcept { return tail_bias_; }
  std::size_t num_entities() const noexcept { return num_entities_; }
  std::size_t num_relations() const noexcept { return num_relations_; }
  const KgConfig& config() const noexcept { return config_; }

 private:
  void check(const Triplet& t) const;

  KgConfig config_;
  Curvature K_;
  std::size_t num_entities_ = 0, num_relations_ = 0;
  ParamId entity_, head_bias_, tail_bias_;
  std::vector<ParamId> fx_weights_;
  std::vector<nn::LorentzLinear<T>> linear_;
};

}  // namespace hybo::models
