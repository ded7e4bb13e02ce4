#include "hybo/models/kg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace hybo::models {

using namespace hybo::ad;

RankMetrics summarize_ranks(const std::vector<double>& ranks) {
  RankMetrics m;
  m.queries = ranks.size();
  if (ranks.empty()) return m;
  for (double r : ranks) {
    m.mrr += 1.0 / r;
    m.hits1 += r <= 1.0 ? 1.0 : 0.0;
    m.hits3 += r <= 3.0 ? 1.0 : 0.0;
    m.hits10 += r <= 10.0 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

template <typename T>
double tie_aware_rank(const std::vector<T>& scores, std::size_t truth, const std::vector<bool>* excluded) {
  const T s = scores.at(truth);
  std::size_t greater = 0, ties = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (c == truth || (excluded != nullptr && (*excluded)[c])) continue;
    if (scores[c] > s) {
      ++greater;
    } else if (scores[c] == s) {
      ++ties;
    }
  }
  return 1.0 + static_cast<double>(greater) + 0.5 * static_cast<double>(ties);
}

std::vector<Triplet> corrupt(const std::vector<Triplet>& positives, std::size_t k, std::size_t num_entities,
                             std::mt19937_64& rng) {
  if (k == 0) throw std::invalid_argument("corrupt: need at least one negative per triplet");
  if (num_entities < 2) throw std::invalid_argument("corrupt: need at least two entities");
  std::uniform_int_distribution<std::uint32_t> side(0, 1);
  std::uniform_int_distribution<std::uint32_t> other(0, static_cast<std::uint32_t>(num_entities - 2));
  std::vector<Triplet> out;
  out.reserve(positives.size() * k);
  for (const auto& p : positives) {
    for (std::size_t j = 0; j < k; ++j) {
      Triplet n = p;
      std::uint32_t& slot = side(rng) == 0 ? n.h : n.t;
      const std::uint32_t e = other(rng);
      slot = e >= slot ? e + 1 : e;
      out.push_back(n);
    }
  }
  return out;
}

namespace {

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.size() == 1) return parts.front();
  std::vector<Tensor<T>> cols;
  cols.reserve(parts.size());
  for (const auto& p : parts) cols.push_back(transpose(p));
  return transpose(concat_last(cols));
}

template <typename T>
Tensor<T> uniform(Shape shape, double range, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-range, range);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(d(rng));
  return Tensor<T>(std::move(shape), std::move(v));
}

}  // namespace

template <typename T>
KgModel<T> KgModel<T>::create(ParameterStore<T>& store, std::size_t num_entities, std::size_t num_relations,
                              const KgConfig& config, std::mt19937_64& rng, Curvature K) {
  if (config.dim < 1 || num_entities < 2 || num_relations < 1) throw std::invalid_argument("kg: invalid sizes");
  KgModel m;
  m.config_ = config;
  m.K_ = K;
  m.num_entities_ = num_entities;
  m.num_relations_ = num_relations;
  const std::size_t n = config.dim;
  m.entity_ = store.add("entity.spatial", uniform<T>({num_entities, n}, config.init_scale, rng), nn::ParamKind::lorentz_rows);
  m.head_bias_ = store.add("entity.head_bias", Tensor<T>::zeros({num_entities, 1}));
  m.tail_bias_ = store.add("entity.tail_bias", Tensor<T>::zeros({num_entities, 1}));
  for (std::size_t r = 0; r < num_relations; ++r) {
    const std::string prefix = "relation" + std::to_string(r);
    if (config.transform == RelationTransform::fx) {
      // Starts near the identity map [0 | I].
      Tensor<T> w = uniform<T>({n, n + 1}, 0.02, rng);
      auto v = w.mutable_values();
      for (std::size_t i = 0; i < n; ++i) v[i * (n + 1) + i + 1] += T(1);
      m.fx_weights_.push_back(store.add(prefix + ".weight", std::move(w)));
    } else {
      nn::LinearOptions opts;
      opts.lambda = config.lambda;
      opts.init_range = 0.1;
      m.linear_.push_back(nn::LorentzLinear<T>::create(store, prefix, n + 1, n, opts, rng, K));
    }
  }
  return m;
}

template <typename T>
void KgModel<T>::check(const Triplet& t) const {
  if (t.h >= num_entities_ || t.t >= num_entities_) {
    throw std::out_of_range("kg: entity id out of range (" + std::to_string(std::max(t.h, t.t)) + ")");
  }
  if (t.r >= num_relations_) throw std::out_of_range("kg: relation id out of range (" + std::to_string(t.r) + ")");
}

template <typename T>
Tensor<T> KgModel<T>::entity_points(Bound<T>& params) const {
  return nn::points_from_spatial(params[entity_], K_);
}

template <typename T>
Tensor<T> KgModel<T>::transform(Bound<T>& params, std::uint32_t relation, const Tensor<T>& points) const {
  if (relation >= num_relations_) throw std::out_of_range("kg: relation id out of range");
  if (config_.transform == RelationTransform::fx) return nn::fx_transform(params[fx_weights_[relation]], points, K_);
  return linear_[relation].forward(params, points);
}

template <typename T>
Tensor<T> KgModel<T>::score(Bound<T>& params, const std::vector<Triplet>& triplets) const {
  if (triplets.empty()) throw std::invalid_argument("kg score: empty batch");
  for (const auto& t : triplets) check(t);
  std::map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < triplets.size(); ++i) groups[triplets[i].r].push_back(i);

  const Tensor<T> spatial = params[entity_];
  std::vector<Tensor<T>> parts;
  std::vector<std::size_t> position(triplets.size());
  std::size_t row = 0;
  for (const auto& [r, idx] : groups) {
    std::vector<std::size_t> heads, tails;
    for (std::size_t i : idx) {
      heads.push_back(triplets[i].h);
      tails.push_back(triplets[i].t);
      position[i] = row++;
    }
    const Tensor<T> h = nn::points_from_spatial(gather_rows(spatial, std::span<const std::size_t>(heads)), K_);
    const Tensor<T> t = nn::points_from_spatial(gather_rows(spatial, std::span<const std::size_t>(tails)), K_);
    const Tensor<T> d2 = nn::sqdist_rows(transform(params, r, h), t, K_);
    const Tensor<T> bh = gather_rows(params[head_bias_], std::span<const std::size_t>(heads));
    const Tensor<T> bt = gather_rows(params[tail_bias_], std::span<const std::size_t>(tails));
    parts.push_back(bh + bt - d2);
  }
  Tensor<T> s = concat_rows(parts);
  if (groups.size() > 1) s = gather_rows(s, std::span<const std::size_t>(position));
  return s + static_cast<T>(config_.margin);
}

template <typename T>
Tensor<T> KgModel<T>::score_tails(Bound<T>& params, std::uint32_t h, std::uint32_t r) const {
  check({h, r, 0});
  const Tensor<T> all = entity_points(params);
  const std::vector<std::size_t> head{h};
  const Tensor<T> q = transform(params, r, gather_rows(all, std::span<const std::size_t>(head)));
  const Tensor<T> bh = gather_rows(params[head_bias_], std::span<const std::size_t>(head));
  return transpose(params[tail_bias_]) + bh - nn::sqdist_matrix(q, all, K_) + static_cast<T>(config_.margin);
}

template <typename T>
Tensor<T> KgModel<T>::loss(Bound<T>& params, const std::vector<Triplet>& positives,
                           const std::vector<Triplet>& negatives) const {
  if (positives.empty()) throw std::invalid_argument("kg loss: empty batch");
  if (negatives.empty() || negatives.size() % positives.size() != 0) {
    throw std::invalid_argument("kg loss: negatives must be k per positive, k >= 1");
  }
  const Tensor<T> pos = score(params, positives);
  const Tensor<T> neg = score(params, negatives);
  const T n = static_cast<T>(positives.size());
  return -(sum(log_sigmoid(pos)) + sum(log_sigmoid(-neg))) / n;
}

template <typename T>
std::vector<double> KgModel<T>::ranks(Bound<T>& params, const std::vector<Triplet>& queries,
                                      const data::TripletStore* filter) const {
  for (const auto& t : queries) check(t);
  std::map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < queries.size(); ++i) groups[queries[i].r].push_back(i);
  const Tensor<T> all = entity_points(params);
  const auto hb = params[head_bias_].values();
  const auto tb = params[tail_bias_].values();
  std::vector<double> out(queries.size());
  for (const auto& [r, idx] : groups) {
    std::vector<std::size_t> heads;
    for (std::size_t i : idx) heads.push_back(queries[i].h);
    const Tensor<T> q = transform(params, r, gather_rows(all, std::span<const std::size_t>(heads)));
    const Tensor<T> d2 = nn::sqdist_matrix(q, all, K_);
    const auto dv = d2.values();
    for (std::size_t qi = 0; qi < idx.size(); ++qi) {
      const Triplet& tr = queries[idx[qi]];
      std::vector<T> scores(num_entities_);
      std::vector<bool> excluded(num_entities_, false);
      for (std::size_t c = 0; c < num_entities_; ++c) {
        scores[c] = hb[tr.h] + tb[c] - dv[qi * num_entities_ + c] + static_cast<T>(config_.margin);
        if (filter != nullptr && c != tr.t && filter->known(tr.h, tr.r, static_cast<std::uint32_t>(c))) {
          excluded[c] = true;
        }
      }
      out[idx[qi]] = tie_aware_rank(scores, tr.t, &excluded);
    }
  }
  return out;
}

template <typename T>
RankMetrics KgModel<T>::evaluate(Bound<T>& params, const std::vector<Triplet>& queries,
                                 const data::TripletStore* filter) const {
  return summarize_ranks(ranks(params, queries, filter));
}

template double tie_aware_rank(const std::vector<float>&, std::size_t, const std::vector<bool>*);
template double tie_aware_rank(const std::vector<double>&, std::size_t, const std::vector<bool>*);
template class KgModel<float>;
template class KgModel<double>;

}  // namespace hybo::models
