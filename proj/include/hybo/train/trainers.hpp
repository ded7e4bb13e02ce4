#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybo/data/datasets.hpp"
#include "hybo/models/gcn.hpp"
#include "hybo/models/kg.hpp"
#include "hybo/models/transformer.hpp"
#include "hybo/train/optim.hpp"

namespace hybo::train {

using json = nlohmann::json;

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  json metric = json::object();
  std::int64_t wall_ms = 0;
};

// One JSON Lines record: {"epoch","loss","metric","wall_ms"}.
std::string to_jsonl(const EpochRecord& r);

using LogSink = std::function<void(const EpochRecord&)>;

// Common outcome of a training run. On a numerical abort the parameters are
// those of the last evaluated-best state (or the initial state).
struct RunStatus {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_valid = 0.0;
  json test_metrics = json::object();
  std::optional<std::string> aborted;
};

struct KgTrainConfig {
  models::KgConfig model;
  OptimConfig optim{OptimizerKind::adam, 5e-3, 0.9, 0.999, 1e-8, 0.5, 1.5};
  std::size_t epochs = 500;
  std::size_t batch_size = 1000;
  std::size_t negatives = 32;
  std::size_t eval_interval = 10;
  std::size_t patience = 0;  // eval intervals without improvement, 0 = off
  std::uint64_t seed = 42;
  double curvature = -1.0;
};

template <typename T>
struct KgRun {
  nn::ParameterStore<T> store;
  models::KgModel<T> model;
  RunStatus status;
};

template <typename T>
KgRun<T> train_kg(const KgTrainConfig& config, const data::TripletStore& data, const LogSink& sink = {});

struct GcnTrainConfig {
  models::GcnConfig model;
  OptimConfig optim{OptimizerKind::adam, 1e-2, 0.9, 0.999, 1e-8, 0.0, 0.0};
  std::size_t epochs = 200;
  std::size_t eval_interval = 10;
  std::size_t patience = 0;
  double valid_fraction = 0.05;
  double test_fraction = 0.10;
  std::uint64_t seed = 42;
  double curvature = -1.0;
};

template <typename T>
struct GcnRun {
  nn::ParameterStore<T> store;
  models::GcnModel<T> model;
  data::LinkSplit links;
  data::NodeSplit nodes;
  RunStatus status;
};

template <typename T>
GcnRun<T> train_gcn(const GcnTrainConfig& config, const data::Graph& graph, const LogSink& sink = {});

// Evaluation helpers shared with checkpoint evaluation.
template <typename T>
double gcn_link_auc(const models::GcnModel<T>& model, const nn::ParameterStore<T>& store, const data::Graph& graph,
                    const std::vector<data::Edge>& message_edges, const std::vector<data::Edge>& pos,
                    const std::vector<data::Edge>& neg);
template <typename T>
double gcn_node_f1(const models::GcnModel<T>& model, const nn::ParameterStore<T>& store, const data::Graph& graph,
                   const std::vector<std::uint32_t>& nodes);

// Masked-token reconstruction: sequences of `max_len` tokens repeating a
// random pattern of `period` distinct symbols drawn from `symbols`; one
// position per sequence is replaced by the mask token (id = symbols).
struct SequenceTask {
  std::size_t symbols = 8;
  std::size_t period = 2;
};

struct MaskedBatch {
  std::vector<std::vector<std::uint32_t>> inputs;
  std::vector<std::size_t> rows;         // flattened row of each masked position
  std::vector<std::uint32_t> targets;
};
MaskedBatch sample_masked_batch(const SequenceTask& task, std::size_t length, std::size_t count, std::mt19937_64& rng);

struct TransformerTrainConfig {
  models::TransformerConfig model;
  SequenceTask task;
  OptimConfig optim{OptimizerKind::adam, 1e-2, 0.9, 0.999, 1e-8, 1.0, 0.0};
  std::size_t epochs = 60;
  std::size_t steps_per_epoch = 20;
  std::size_t batch_size = 16;
  std::size_t eval_sequences = 256;
  std::size_t eval_interval = 5;
  std::size_t patience = 0;
  std::uint64_t seed = 42;
  double curvature = -1.0;
};

template <typename T>
struct TransformerRun {
  nn::ParameterStore<T> store;
  models::ToyTransformer<T> model;
  RunStatus status;
  // Largest manifold violation over all intermediate representations seen
  // during evaluation passes.
  double max_manifold_error = 0.0;
  bool time_positive = true;
};

template <typename T>
TransformerRun<T> train_transformer(const TransformerTrainConfig& config, const LogSink& sink = {});

// Accuracy on masked positions plus manifold statistics for one batch.
template <typename T>
json transformer_accuracy(const models::ToyTransformer<T>& model, const nn::ParameterStore<T>& store,
                          const MaskedBatch& batch, double* max_manifold_error = nullptr, bool* time_positive = nullptr);

}  // namespace hybo::train
