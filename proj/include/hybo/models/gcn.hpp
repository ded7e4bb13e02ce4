#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "hybo/data/datasets.hpp"
#include "hybo/nn/layers.hpp"

namespace hybo::models {

using nn::Bound;
using nn::Curvature;
using nn::ParamId;
using nn::ParameterStore;
using nn::Tensor;

// p = 1 / (exp((d2 - r) / t) + 1)
double fermi_dirac(double d2, double r, double t);
template <typename T> Tensor<T> fermi_dirac(const Tensor<T>& d2, double r, double t);
// log p and log(1 - p), computed without forming p.
template <typename T> Tensor<T> fermi_dirac_log(const Tensor<T>& d2, double r, double t);
template <typename T> Tensor<T> fermi_dirac_log_complement(const Tensor<T>& d2, double r, double t);

// p = sigmoid(-d2(repr, type) / alpha + beta)
double type_probability(const lorentz::Vec<double>& repr, const lorentz::Vec<double>& type_embedding, double alpha,
                        double beta, Curvature K = Curvature());
template <typename T>
Tensor<T> type_probability(const Tensor<T>& reprs, const Tensor<T>& type_embedding, double alpha, double beta,
                           Curvature K = Curvature());

// Additive attention mask over `num_nodes` nodes: 0 where j is a neighbour of
// i (or i itself when self_loops), mask_out elsewhere. A node with no
// admissible key attends to itself.
template <typename T>
Tensor<T> neighbourhood_mask(std::size_t num_nodes, const std::vector<data::Edge>& edges, bool self_loops);

enum class GcnTask { link_prediction, node_classification };

struct GcnConfig {
  std::size_t in_features = 0;  // Euclidean input features per node
  std::size_t dim = 16;         // spatial dimension of hidden points
  std::size_t layers = 1;
  bool self_loops = true;
  double dropout = 0.0;
  GcnTask task = GcnTask::link_prediction;
  std::size_t num_classes = 2;
  double fd_r = 2.0, fd_t = 1.0;
};

// One layer: h = HL(x); out_i = centroid over admissible j of h_j with
// distance-softmax weights queried by h_i.
template <typename T>
class GcnLayer {
 public:
  static GcnLayer create(ParameterStore<T>& store, const std::string& prefix, std::size_t in_features,
                         std::size_t out_spatial, const nn::LinearOptions& options, std::mt19937_64& rng,
                         Curvature K = Curvature());
  Tensor<T> forward(Bound<T>& params, const Tensor<T>& x, const Tensor<T>& mask, std::mt19937_64* dropout_rng) const;

 private:
  nn::LorentzLinear<T> linear_;
  std::size_t out_ = 0;
  Curvature K_;
};

template <typename T>
class GcnModel {
 public:
  static GcnModel create(ParameterStore<T>& store, const GcnConfig& config, std::mt19937_64& rng,
                         Curvature K = Curvature());

  // Node points after every layer; the last entry is the final embedding.
  std::vector<Tensor<T>> forward_all(Bound<T>& params, const Tensor<T>& features, const Tensor<T>& mask,
                                     std::mt19937_64* dropout_rng = nullptr) const;
  Tensor<T> forward(Bound<T>& params, const Tensor<T>& features, const Tensor<T>& mask,
                    std::mt19937_64* dropout_rng = nullptr) const;

  // Squared distances between the endpoints of each pair, [P, 1].
  Tensor<T> pair_sqdist(const Tensor<T>& embeddings, const std::vector<data::Edge>& pairs) const;
  // Binary cross-entropy over Fermi-Dirac edge probabilities.
  Tensor<T> link_loss(const Tensor<T>& embeddings, const std::vector<data::Edge>& pos,
                      const std::vector<data::Edge>& neg) const;
  // Class logits -d2(node, class embedding), [N, C].
  Tensor<T> class_logits(Bound<T>& params, const Tensor<T>& embeddings) const;
  Tensor<T> class_loss(Bound<T>& params, const Tensor<T>& embeddings, const std::vector<std::uint32_t>& nodes,
                       const std::vector<std::uint32_t>& labels) const;

  const GcnConfig& config() const noexcept { return config_; }

 private:
  GcnConfig config_;
  Curvature K_;
  std::vector<GcnLayer<T>> layers_;
  std::optional<ParamId> classes_;
};

}  // namespace hybo::models
