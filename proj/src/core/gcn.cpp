#include "hybo/models/gcn.hpp"

#include <cmath>
#include <stdexcept>

namespace hybo::models {

using namespace hybo::ad;

double fermi_dirac(double d2, double r, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("fermi_dirac: temperature must be positive");
  const double z = (d2 - r) / t;
  // 1 / (e^z + 1) evaluated on the side that does not overflow.
  if (z > 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (std::exp(z) + 1.0);
}

template <typename T>
Tensor<T> fermi_dirac(const Tensor<T>& d2, double r, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("fermi_dirac: temperature must be positive");
  return sigmoid((d2 - static_cast<T>(r)) * static_cast<T>(-1.0 / t));
}

template <typename T>
Tensor<T> fermi_dirac_log(const Tensor<T>& d2, double r, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("fermi_dirac: temperature must be positive");
  return log_sigmoid((d2 - static_cast<T>(r)) * static_cast<T>(-1.0 / t));
}

template <typename T>
Tensor<T> fermi_dirac_log_complement(const Tensor<T>& d2, double r, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("fermi_dirac: temperature must be positive");
  return log_sigmoid((d2 - static_cast<T>(r)) * static_cast<T>(1.0 / t));
}

double type_probability(const lorentz::Vec<double>& repr, const lorentz::Vec<double>& type_embedding, double alpha,
                        double beta, Curvature K) {
  if (alpha == 0.0) throw std::invalid_argument("type_probability: alpha must be nonzero");
  const double z = -lorentz::squared_distance(repr, type_embedding, K) / alpha + beta;
  return 1.0 / (1.0 + std::exp(-z));
}

template <typename T>
Tensor<T> type_probability(const Tensor<T>& reprs, const Tensor<T>& type_embedding, double alpha, double beta,
                           Curvature K) {
  if (alpha == 0.0) throw std::invalid_argument("type_probability: alpha must be nonzero");
  const Tensor<T> d2 = nn::sqdist_matrix(reprs, type_embedding, K);
  return sigmoid(d2 * static_cast<T>(-1.0 / alpha) + static_cast<T>(beta));
}

template <typename T>
Tensor<T> neighbourhood_mask(std::size_t num_nodes, const std::vector<data::Edge>& edges, bool self_loops) {
  std::vector<T> m(num_nodes * num_nodes, nn::mask_out<T>());
  std::vector<bool> has_key(num_nodes, false);
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) throw std::out_of_range("neighbourhood_mask: node id out of range");
    m[u * num_nodes + v] = T(0);
    m[v * num_nodes + u] = T(0);
    has_key[u] = has_key[v] = true;
  }
  for (std::size_t i = 0; i < num_nodes; ++i) {
    if (self_loops || !has_key[i]) m[i * num_nodes + i] = T(0);
  }
  return Tensor<T>({num_nodes, num_nodes}, std::move(m));
}

template <typename T>
GcnLayer<T> GcnLayer<T>::create(ParameterStore<T>& store, const std::string& prefix, std::size_t in_features,
                                std::size_t out_spatial, const nn::LinearOptions& options, std::mt19937_64& rng,
                                Curvature K) {
  GcnLayer l;
  l.linear_ = nn::LorentzLinear<T>::create(store, prefix, in_features, out_spatial, options, rng, K);
  l.out_ = out_spatial;
  l.K_ = K;
  return l;
}

template <typename T>
Tensor<T> GcnLayer<T>::forward(Bound<T>& params, const Tensor<T>& x, const Tensor<T>& mask,
                               std::mt19937_64* dropout_rng) const {
  const Tensor<T> h = linear_.forward(params, x, dropout_rng);
  return nn::lorentz_attention(h, h, h, out_, K_, std::optional<Tensor<T>>(mask));
}

template <typename T>
GcnModel<T> GcnModel<T>::create(ParameterStore<T>& store, const GcnConfig& config, std::mt19937_64& rng,
                                Curvature K) {
  if (config.in_features == 0 || config.dim == 0 || config.layers == 0) {
    throw std::invalid_argument("gcn: features, dim and layers must be positive");
  }
  GcnModel m;
  m.config_ = config;
  m.K_ = K;
  for (std::size_t l = 0; l < config.layers; ++l) {
    nn::LinearOptions opts;
    opts.dropout = config.dropout;
    opts.activation = l == 0 ? nn::Activation::identity : nn::Activation::relu;
    opts.init_range = 0.3;
    const std::size_t in = l == 0 ? config.in_features + 1 : config.dim + 1;
    m.layers_.push_back(GcnLayer<T>::create(store, "layer" + std::to_string(l), in, config.dim, opts, rng, K));
  }
  if (config.task == GcnTask::node_classification) {
    if (config.num_classes < 2) throw std::invalid_argument("gcn: need at least two classes");
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<T> v(config.num_classes * config.dim);
    for (auto& x : v) x = static_cast<T>(d(rng));
    m.classes_ = store.add("classes.spatial", Tensor<T>({config.num_classes, config.dim}, std::move(v)),
                           nn::ParamKind::lorentz_rows);
  }
  return m;
}

template <typename T>
std::vector<Tensor<T>> GcnModel<T>::forward_all(Bound<T>& params, const Tensor<T>& features, const Tensor<T>& mask,
                                                std::mt19937_64* dropout_rng) const {
  if (features.cols() != config_.in_features) {
    throw ShapeError("gcn: expected " + std::to_string(config_.in_features) + " features per node, got " +
                     shape_str(features.shape()));
  }
  std::vector<Tensor<T>> out;
  Tensor<T> x = nn::points_from_spatial(features, K_);
  for (const auto& layer : layers_) {
    x = layer.forward(params, x, mask, dropout_rng);
    out.push_back(x);
  }
  return out;
}

template <typename T>
Tensor<T> GcnModel<T>::forward(Bound<T>& params, const Tensor<T>& features, const Tensor<T>& mask,
                               std::mt19937_64* dropout_rng) const {
  return forward_all(params, features, mask, dropout_rng).back();
}

template <typename T>
Tensor<T> GcnModel<T>::pair_sqdist(const Tensor<T>& embeddings, const std::vector<data::Edge>& pairs) const {
  std::vector<std::size_t> a, b;
  for (const auto& [u, v] : pairs) {
    a.push_back(u);
    b.push_back(v);
  }
  return nn::sqdist_rows(gather_rows(embeddings, std::span<const std::size_t>(a)),
                         gather_rows(embeddings, std::span<const std::size_t>(b)), K_);
}

template <typename T>
Tensor<T> GcnModel<T>::link_loss(const Tensor<T>& embeddings, const std::vector<data::Edge>& pos,
                                 const std::vector<data::Edge>& neg) const {
  if (pos.empty() || neg.empty()) throw std::invalid_argument("gcn link loss: empty edge set");
  const Tensor<T> lp = fermi_dirac_log(pair_sqdist(embeddings, pos), config_.fd_r, config_.fd_t);
  const Tensor<T> ln = fermi_dirac_log_complement(pair_sqdist(embeddings, neg), config_.fd_r, config_.fd_t);
  return -(mean(lp) + mean(ln));
}

template <typename T>
Tensor<T> GcnModel<T>::class_logits(Bound<T>& params, const Tensor<T>& embeddings) const {
  if (!classes_) throw std::logic_error("gcn: model was not built for node classification");
  return -nn::sqdist_matrix(embeddings, nn::points_from_spatial(params[*classes_], K_), K_);
}

template <typename T>
Tensor<T> GcnModel<T>::class_loss(Bound<T>& params, const Tensor<T>& embeddings,
                                  const std::vector<std::uint32_t>& nodes,
                                  const std::vector<std::uint32_t>& labels) const {
  if (nodes.empty()) throw std::invalid_argument("gcn class loss: no nodes");
  std::vector<std::size_t> idx(nodes.begin(), nodes.end());
  const Tensor<T> lp = log_softmax_last(gather_rows(class_logits(params, embeddings), std::span<const std::size_t>(idx)));
  const std::size_t C = config_.num_classes;
  std::vector<T> onehot(nodes.size() * C, T(0));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto y = labels.at(nodes[i]);
    if (y >= C) throw std::out_of_range("gcn: label out of range");
    onehot[i * C + y] = T(1);
  }
  return -sum(lp * Tensor<T>({nodes.size(), C}, std::move(onehot))) / static_cast<T>(nodes.size());
}

#define HYBO_INSTANTIATE(T)                                                                                     \
  template Tensor<T> fermi_dirac(const Tensor<T>&, double, double);                                            \
  template Tensor<T> fermi_dirac_log(const Tensor<T>&, double, double);                                        \
  template Tensor<T> fermi_dirac_log_complement(const Tensor<T>&, double, double);                             \
  template Tensor<T> type_probability(const Tensor<T>&, const Tensor<T>&, double, double, Curvature);          \
  template Tensor<T> neighbourhood_mask<T>(std::size_t, const std::vector<data::Edge>&, bool);                 \
  template class GcnLayer<T>;                                                                                   \
  template class GcnModel<T>;

HYBO_INSTANTIATE(float)
HYBO_INSTANTIATE(double)
#undef HYBO_INSTANTIATE

}  // namespace hybo::models
