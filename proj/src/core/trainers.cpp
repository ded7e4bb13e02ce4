#include "hybo/train/trainers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "hybo/train/metrics.hpp"

namespace hybo::train {

using namespace hybo::ad;

std::string to_jsonl(const EpochRecord& r) {
  json j;
  j["epoch"] = r.epoch;
  j["loss"] = r.loss;
  j["metric"] = r.metric;
  j["wall_ms"] = r.wall_ms;
  return j.dump();
}

namespace {

class Clock {
 public:
  std::int64_t elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

bool due(std::size_t epoch, std::size_t total, std::size_t interval) {
  return epoch == total || (interval > 0 && epoch % interval == 0);
}

// Runs one optimizer step on the gradient of `loss`; returns false and fills
// `abort` when the loss or a gradient is not finite.
template <typename T>
bool apply_step(Optimizer<T>& opt, nn::ParameterStore<T>& store, Tape<T>& tape, nn::Bound<T>& params,
                const Tensor<T>& loss, std::size_t epoch, std::optional<std::string>& abort) {
  const double value = static_cast<double>(loss.item());
  if (!std::isfinite(value)) {
    abort = "non-finite loss at epoch " + std::to_string(epoch);
    return false;
  }
  tape.backward(loss);
  try {
    opt.step(store, params.gradients());
  } catch (const NumericalError& e) {
    abort = std::string(e.what()) + " at epoch " + std::to_string(epoch);
    return false;
  }
  return true;
}

}  // namespace

template <typename T>
KgRun<T> train_kg(const KgTrainConfig& config, const data::TripletStore& data, const LogSink& sink) {
  if (config.batch_size == 0 || config.negatives == 0) throw std::invalid_argument("train_kg: batch size and negatives must be positive");
  std::mt19937_64 rng(config.seed);
  KgRun<T> run;
  run.model = models::KgModel<T>::create(run.store, data.num_entities(), data.num_relations(), config.model, rng,
                                         Curvature(config.curvature));
  Optimizer<T> opt(run.store, config.optim, Curvature(config.curvature));

  auto validate = [&]() {
    nn::Bound<T> params(run.store);
    return run.model.evaluate(params, data.valid.empty() ? data.train : data.valid, &data);
  };

  nn::ParameterStore<T> best = run.store;
  run.status.best_valid = validate().mrr;
  std::size_t stale = 0;
  Clock clock;
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<data::Triplet> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(data.train[order[i]]);
      const auto negatives = models::corrupt(batch, config.negatives, data.num_entities(), rng);
      Tape<T> tape;
      nn::Bound<T> params(run.store, &tape);
      const Tensor<T> loss = run.model.loss(params, batch, negatives);
      if (!apply_step(opt, run.store, tape, params, loss, epoch, run.status.aborted)) break;
      total += static_cast<double>(loss.item()) * static_cast<double>(batch.size());
    }
    if (run.status.aborted) break;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = total / static_cast<double>(order.size());
    if (due(epoch, config.epochs, config.eval_interval)) {
      const auto m = validate();
      rec.metric = {{"mrr", m.mrr}, {"hits1", m.hits1}, {"hits3", m.hits3}, {"hits10", m.hits10}};
      if (m.mrr > run.status.best_valid) {
        run.status.best_valid = m.mrr;
        run.status.best_epoch = epoch;
        best = run.store;
        stale = 0;
      } else {
        ++stale;
      }
    }
    rec.wall_ms = clock.elapsed_ms();
    run.status.log.push_back(rec);
    if (sink) sink(rec);
    if (config.patience > 0 && stale >= config.patience) break;
  }

  run.store = best;
  nn::Bound<T> params(run.store);
  const auto test = run.model.evaluate(params, data.test.empty() ? data.train : data.test, &data);
  run.status.test_metrics = {{"mrr", test.mrr}, {"hits1", test.hits1}, {"hits3", test.hits3}, {"hits10", test.hits10}};
  return run;
}

namespace {

template <typename T>
Tensor<T> feature_tensor(const data::Graph& g) {
  if (g.feature_dim == 0) {
    std::vector<T> eye(g.num_nodes * g.num_nodes, T(0));
    for (std::size_t i = 0; i < g.num_nodes; ++i) eye[i * g.num_nodes + i] = T(1);
    return Tensor<T>({g.num_nodes, g.num_nodes}, std::move(eye));
  }
  std::vector<T> v(g.features.begin(), g.features.end());
  return Tensor<T>({g.num_nodes, g.feature_dim}, std::move(v));
}

std::size_t feature_width(const data::Graph& g) { return g.feature_dim == 0 ? g.num_nodes : g.feature_dim; }

std::vector<data::Edge> sample_training_negatives(const data::Graph& g, const std::set<data::Edge>& train,
                                                  std::size_t count, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(g.num_nodes - 1));
  std::vector<data::Edge> out;
  out.reserve(count);
  while (out.size() < count) {
    std::uint32_t u = pick(rng), v = pick(rng);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (train.count({u, v}) != 0) continue;
    out.push_back({u, v});
  }
  return out;
}

}  // namespace

template <typename T>
double gcn_link_auc(const models::GcnModel<T>& model, const nn::ParameterStore<T>& store, const data::Graph& graph,
                    const std::vector<data::Edge>& message_edges, const std::vector<data::Edge>& pos,
                    const std::vector<data::Edge>& neg) {
  nn::Bound<T> params(store);
  const auto mask = models::neighbourhood_mask<T>(graph.num_nodes, message_edges, model.config().self_loops);
  const auto emb = model.forward(params, feature_tensor<T>(graph), mask);
  auto scores = [&](const std::vector<data::Edge>& e) {
    const auto d2 = model.pair_sqdist(emb, e);
    std::vector<double> s;
    for (T x : d2.values()) s.push_back(-static_cast<double>(x));
    return s;
  };
  return roc_auc(scores(pos), scores(neg));
}

template <typename T>
double gcn_node_f1(const models::GcnModel<T>& model, const nn::ParameterStore<T>& store, const data::Graph& graph,
                   const std::vector<std::uint32_t>& nodes) {
  nn::Bound<T> params(store);
  const auto mask = models::neighbourhood_mask<T>(graph.num_nodes, graph.edges, model.config().self_loops);
  const auto logits = model.class_logits(params, model.forward(params, feature_tensor<T>(graph), mask));
  std::vector<std::uint32_t> pred, truth;
  for (auto i : nodes) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    pred.push_back(static_cast<std::uint32_t>(best));
    truth.push_back(graph.labels.at(i));
  }
  return f1_macro(pred, truth, model.config().num_classes);
}

template <typename T>
GcnRun<T> train_gcn(const GcnTrainConfig& config, const data::Graph& graph, const LogSink& sink) {
  if (graph.num_nodes < 2) throw std::invalid_argument("train_gcn: graph needs at least two nodes");
  const bool lp = config.model.task == models::GcnTask::link_prediction;
  if (!lp && graph.labels.size() != graph.num_nodes) throw std::invalid_argument("train_gcn: node labels required");
  std::mt19937_64 rng(config.seed);
  GcnRun<T> run;
  models::GcnConfig mc = config.model;
  mc.in_features = feature_width(graph);
  if (!lp) mc.num_classes = std::max(mc.num_classes, graph.num_classes);
  run.model = models::GcnModel<T>::create(run.store, mc, rng, Curvature(config.curvature));
  Optimizer<T> opt(run.store, config.optim, Curvature(config.curvature));

  const Tensor<T> features = feature_tensor<T>(graph);
  std::set<data::Edge> train_set;
  std::vector<std::uint32_t> all_labels = graph.labels;
  if (lp) {
    run.links = data::split_edges(graph, config.valid_fraction, config.test_fraction, config.seed);
    if (run.links.train.empty() || run.links.valid_pos.empty() || run.links.test_pos.empty()) {
      throw std::invalid_argument("train_gcn: too few edges for a link split");
    }
    train_set.insert(run.links.train.begin(), run.links.train.end());
  } else {
    run.nodes = data::split_nodes(graph, std::max(config.valid_fraction, 0.2), std::max(config.test_fraction, 0.2),
                                  config.seed);
  }
  const Tensor<T> mask = models::neighbourhood_mask<T>(graph.num_nodes, lp ? run.links.train : graph.edges,
                                                       config.model.self_loops);

  auto validate = [&]() {
    return lp ? gcn_link_auc(run.model, run.store, graph, run.links.train, run.links.valid_pos, run.links.valid_neg)
              : gcn_node_f1(run.model, run.store, graph, run.nodes.valid);
  };

  nn::ParameterStore<T> best = run.store;
  run.status.best_valid = validate();
  std::size_t stale = 0;
  Clock clock;
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Tape<T> tape;
    nn::Bound<T> params(run.store, &tape);
    const Tensor<T> emb = run.model.forward(params, features, mask, config.model.dropout > 0 ? &dropout_rng : nullptr);
    Tensor<T> loss;
    if (lp) {
      const auto neg = sample_training_negatives(graph, train_set, run.links.train.size(), rng);
      loss = run.model.link_loss(emb, run.links.train, neg);
    } else {
      loss = run.model.class_loss(params, emb, run.nodes.train, all_labels);
    }
    if (!apply_step(opt, run.store, tape, params, loss, epoch, run.status.aborted)) break;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = static_cast<double>(loss.item());
    if (due(epoch, config.epochs, config.eval_interval)) {
      const double v = validate();
      rec.metric = {{lp ? "roc_auc" : "f1", v}};
      if (v > run.status.best_valid) {
        run.status.best_valid = v;
        run.status.best_epoch = epoch;
        best = run.store;
        stale = 0;
      } else {
        ++stale;
      }
    }
    rec.wall_ms = clock.elapsed_ms();
    run.status.log.push_back(rec);
    if (sink) sink(rec);
    if (config.patience > 0 && stale >= config.patience) break;
  }
  run.store = best;
  if (lp) {
    run.status.test_metrics = {
        {"roc_auc", gcn_link_auc(run.model, run.store, graph, run.links.train, run.links.test_pos, run.links.test_neg)}};
  } else {
    run.status.test_metrics = {{"f1", gcn_node_f1(run.model, run.store, graph, run.nodes.test)}};
  }
  return run;
}

MaskedBatch sample_masked_batch(const SequenceTask& task, std::size_t length, std::size_t count, std::mt19937_64& rng) {
  if (task.period < 1 || task.period > task.symbols) throw std::invalid_argument("sequence task: period must lie in [1, symbols]");
  if (length < 2) throw std::invalid_argument("sequence task: length must be at least 2");
  MaskedBatch b;
  std::vector<std::uint32_t> alphabet(task.symbols);
  std::iota(alphabet.begin(), alphabet.end(), 0u);
  std::uniform_int_distribution<std::size_t> where(0, length - 1);
  for (std::size_t s = 0; s < count; ++s) {
    std::shuffle(alphabet.begin(), alphabet.end(), rng);
    std::vector<std::uint32_t> seq(length);
    for (std::size_t i = 0; i < length; ++i) seq[i] = alphabet[i % task.period];
    const std::size_t m = where(rng);
    b.targets.push_back(seq[m]);
    b.rows.push_back(s * length + m);
    seq[m] = static_cast<std::uint32_t>(task.symbols);
    b.inputs.push_back(std::move(seq));
  }
  return b;
}

template <typename T>
json transformer_accuracy(const models::ToyTransformer<T>& model, const nn::ParameterStore<T>& store,
                          const MaskedBatch& batch, double* max_manifold_error, bool* time_positive) {
  nn::Bound<T> params(store);
  std::vector<Tensor<T>> trace;
  const Tensor<T> points = model.forward(params, batch.inputs, nullptr, &trace);
  const Tensor<T> logits = model.logits(params, gather_rows(points, std::span<const std::size_t>(batch.rows)));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.rows.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    if (best == batch.targets[i]) ++correct;
  }
  double worst = 0.0;
  bool positive = true;
  for (const auto& t : trace) {
    const auto check = nn::check_points(t, model.curvature());
    worst = std::max(worst, check.max_error);
    positive = positive && check.time_positive;
  }
  if (max_manifold_error != nullptr) *max_manifold_error = std::max(*max_manifold_error, worst);
  if (time_positive != nullptr) *time_positive = *time_positive && positive;
  return {{"accuracy", static_cast<double>(correct) / static_cast<double>(batch.rows.size())},
          {"manifold_error", worst}};
}

template <typename T>
TransformerRun<T> train_transformer(const TransformerTrainConfig& config, const LogSink& sink) {
  if (config.batch_size == 0 || config.steps_per_epoch == 0) throw std::invalid_argument("train_transformer: empty schedule");
  models::TransformerConfig mc = config.model;
  mc.vocab = config.task.symbols + 1;
  std::mt19937_64 rng(config.seed);
  TransformerRun<T> run;
  run.model = models::ToyTransformer<T>::create(run.store, mc, rng, Curvature(config.curvature));
  Optimizer<T> opt(run.store, config.optim, Curvature(config.curvature));
  std::mt19937_64 eval_rng(config.seed + 1);
  const MaskedBatch eval = sample_masked_batch(config.task, mc.max_len, config.eval_sequences, eval_rng);
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  auto validate = [&]() {
    return transformer_accuracy(run.model, run.store, eval, &run.max_manifold_error, &run.time_positive);
  };
  nn::ParameterStore<T> best = run.store;
  run.status.best_valid = validate()["accuracy"].template get<double>();
  std::size_t stale = 0;
  Clock clock;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t step = 0; step < config.steps_per_epoch; ++step) {
      const MaskedBatch b = sample_masked_batch(config.task, mc.max_len, config.batch_size, rng);
      Tape<T> tape;
      nn::Bound<T> params(run.store, &tape);
      const Tensor<T> points = run.model.forward(params, b.inputs, mc.dropout > 0 ? &dropout_rng : nullptr);
      const Tensor<T> loss = run.model.loss(params, points, b.rows, b.targets);
      if (!apply_step(opt, run.store, tape, params, loss, epoch, run.status.aborted)) break;
      total += static_cast<double>(loss.item());
    }
    if (run.status.aborted) break;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = total / static_cast<double>(config.steps_per_epoch);
    if (due(epoch, config.epochs, config.eval_interval)) {
      rec.metric = validate();
      const double acc = rec.metric["accuracy"].template get<double>();
      if (acc > run.status.best_valid) {
        run.status.best_valid = acc;
        run.status.best_epoch = epoch;
        best = run.store;
        stale = 0;
      } else {
        ++stale;
      }
    }
    rec.wall_ms = clock.elapsed_ms();
    run.status.log.push_back(rec);
    if (sink) sink(rec);
    if (config.patience > 0 && stale >= config.patience) break;
  }
  run.store = best;
  std::mt19937_64 test_rng(config.seed + 2);
  const MaskedBatch test = sample_masked_batch(config.task, mc.max_len, config.eval_sequences, test_rng);
  run.status.test_metrics = transformer_accuracy(run.model, run.store, test, &run.max_manifold_error, &run.time_positive);
  return run;
}

#define HYBO_INSTANTIATE(T)                                                                                       \
  template KgRun<T> train_kg<T>(const KgTrainConfig&, const data::TripletStore&, const LogSink&);                \
  template GcnRun<T> train_gcn<T>(const GcnTrainConfig&, const data::Graph&, const LogSink&);                    \
  template double gcn_link_auc<T>(const models::GcnModel<T>&, const nn::ParameterStore<T>&, const data::Graph&,  \
                                  const std::vector<data::Edge>&, const std::vector<data::Edge>&,                \
                                  const std::vector<data::Edge>&);                                                \
  template double gcn_node_f1<T>(const models::GcnModel<T>&, const nn::ParameterStore<T>&, const data::Graph&,   \
                                 const std::vector<std::uint32_t>&);                                              \
  template json transformer_accuracy<T>(const models::ToyTransformer<T>&, const nn::ParameterStore<T>&,           \
                                        const MaskedBatch&, double*, bool*);                                      \
  template TransformerRun<T> train_transformer<T>(const TransformerTrainConfig&, const LogSink&);

HYBO_INSTANTIATE(float)
HYBO_INSTANTIATE(double)
#undef HYBO_INSTANTIATE

}  // namespace hybo::train
