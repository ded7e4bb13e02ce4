#include "hybo/app/run.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace hybo::app {

namespace fs = std::filesystem;

std::string model_name(ModelKind m) {
  switch (m) {
    case ModelKind::kg:
      return "kg";
    case ModelKind::gcn:
      return "gcn";
    case ModelKind::transformer:
      return "toy-transformer";
  }
  return "kg";
}

ModelKind parse_model(const std::string& name) {
  if (name == "kg") return ModelKind::kg;
  if (name == "gcn") return ModelKind::gcn;
  if (name == "toy-transformer") return ModelKind::transformer;
  throw ConfigError("unknown model '" + name + "' (expected kg, gcn or toy-transformer)");
}

RunConfig default_config(ModelKind model) {
  RunConfig c;
  c.model = model;
  if (model == ModelKind::gcn) {
    c.generator.kind = "tree";
    c.generator.branching = 2;
    c.generator.depth = 5;
  }
  return c;
}

namespace {

json optim_json(const train::OptimConfig& o) {
  return {{"optimizer", o.kind == train::OptimizerKind::adam ? "adam" : "rsgd"},
          {"lr", o.lr},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"eps", o.eps},
          {"grad_norm", o.grad_norm},
          {"max_norm", o.max_norm}};
}

void read_optim(const json& j, train::OptimConfig& o) {
  const std::string kind = j.at("optimizer").get<std::string>();
  if (kind == "adam") {
    o.kind = train::OptimizerKind::adam;
  } else if (kind == "rsgd") {
    o.kind = train::OptimizerKind::rsgd;
  } else {
    throw ConfigError("train.optimizer must be adam or rsgd, got '" + kind + "'");
  }
  o.lr = j.at("lr").get<double>();
  o.beta1 = j.at("beta1").get<double>();
  o.beta2 = j.at("beta2").get<double>();
  o.eps = j.at("eps").get<double>();
  o.grad_norm = j.at("grad_norm").get<double>();
  o.max_norm = j.at("max_norm").get<double>();
  if (!(o.lr > 0.0) || !std::isfinite(o.lr)) throw ConfigError("train.lr must be positive");
  if (o.beta1 < 0.0 || o.beta1 >= 1.0 || o.beta2 < 0.0 || o.beta2 >= 1.0) throw ConfigError("train.beta1/beta2 must lie in [0, 1)");
  if (!(o.eps > 0.0)) throw ConfigError("train.eps must be positive");
  if (o.grad_norm < 0.0 || o.max_norm < 0.0) throw ConfigError("train.grad_norm and train.max_norm must be >= 0 (0 disables)");
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// Overlays `doc` onto `base`, rejecting keys and types the defaults do not have.
void merge(json& base, const json& doc, const std::string& path) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown configuration key '" + key + "'");
    json& slot = base[it.key()];
    const json& v = it.value();
    if (slot.is_object()) {
      if (!v.is_object()) throw ConfigError("'" + key + "' must be an object");
      merge(slot, v, key);
    } else if (slot.is_null() || slot.is_string()) {
      if (!(v.is_string() || (slot.is_null() && v.is_null()))) throw ConfigError("'" + key + "' must be a string");
      slot = v;
    } else if (slot.is_boolean()) {
      if (!v.is_boolean()) throw ConfigError("'" + key + "' must be true or false");
      slot = v;
    } else if (slot.is_number_unsigned()) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError("'" + key + "' must be a non-negative integer");
      }
      slot = v.get<std::uint64_t>();
    } else {
      if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
      slot = v.get<double>();
    }
  }
}

RunConfig from_json(const json& j) {
  RunConfig c = default_config(parse_model(j.at("model").get<std::string>()));
  const std::string precision = j.at("precision").get<std::string>();
  require(precision == "f32" || precision == "f64", "precision must be f32 or f64, got '" + precision + "'");
  c.precision = precision == "f32" ? Precision::f32 : Precision::f64;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.curvature = j.at("curvature").get<double>();
  require(c.curvature < 0.0 && std::isfinite(c.curvature), "curvature must be negative");
  const std::size_t dim = j.at("dim").get<std::size_t>();
  require(dim >= 1, "dim must be at least 1");
  if (j.contains("data") && j.at("data").is_string()) c.data = j.at("data").get<std::string>();
  const json& t = j.at("train");
  const std::size_t epochs = t.at("epochs").get<std::size_t>();
  const std::size_t eval_interval = t.at("eval_interval").get<std::size_t>();
  const std::size_t patience = t.at("patience").get<std::size_t>();

  if (c.model == ModelKind::kg) {
    const json& g = j.at("generator");
    c.generator.branching = g.at("branching").get<std::size_t>();
    c.generator.depth = g.at("depth").get<std::size_t>();
    require(c.generator.branching >= 2 && c.generator.depth >= 2, "generator needs branching >= 2 and depth >= 2");
    auto& k = c.kg;
    read_optim(t, k.optim);
    k.epochs = epochs;
    k.eval_interval = eval_interval;
    k.patience = patience;
    k.batch_size = t.at("batch_size").get<std::size_t>();
    k.negatives = t.at("negatives").get<std::size_t>();
    require(k.batch_size >= 1 && k.negatives >= 1, "train.batch_size and train.negatives must be at least 1");
    const json& m = j.at("kg");
    k.model.dim = dim;
    k.model.margin = m.at("margin").get<double>();
    k.model.init_scale = m.at("init_scale").get<double>();
    k.model.lambda = m.at("lambda").get<double>();
    const std::string tr = m.at("transform").get<std::string>();
    require(tr == "fx" || tr == "linear", "kg.transform must be fx or linear");
    k.model.transform = tr == "fx" ? models::RelationTransform::fx : models::RelationTransform::linear;
    require(k.model.init_scale > 0.0 && k.model.lambda > 0.0, "kg.init_scale and kg.lambda must be positive");
    k.seed = c.seed;
    k.curvature = c.curvature;
  } else if (c.model == ModelKind::gcn) {
    const json& g = j.at("generator");
    c.generator.kind = g.at("kind").get<std::string>();
    c.generator.branching = g.at("branching").get<std::size_t>();
    c.generator.depth = g.at("depth").get<std::size_t>();
    c.generator.size = g.at("size").get<std::size_t>();
    require(c.generator.kind == "tree" || c.generator.kind == "barbell", "generator.kind must be tree or barbell");
    auto& k = c.gcn;
    read_optim(t, k.optim);
    k.epochs = epochs;
    k.eval_interval = eval_interval;
    k.patience = patience;
    k.valid_fraction = t.at("valid_fraction").get<double>();
    k.test_fraction = t.at("test_fraction").get<double>();
    require(k.valid_fraction > 0.0 && k.test_fraction > 0.0 && k.valid_fraction + k.test_fraction < 1.0,
            "train.valid_fraction and train.test_fraction must be positive with a sum below 1");
    const json& m = j.at("gcn");
    k.model.dim = dim;
    const std::string task = m.at("task").get<std::string>();
    require(task == "lp" || task == "nc", "gcn.task must be lp or nc");
    k.model.task = task == "lp" ? models::GcnTask::link_prediction : models::GcnTask::node_classification;
    k.model.layers = m.at("layers").get<std::size_t>();
    k.model.self_loops = m.at("self_loops").get<bool>();
    k.model.dropout = m.at("dropout").get<double>();
    k.model.fd_r = m.at("fd_r").get<double>();
    k.model.fd_t = m.at("fd_t").get<double>();
    require(k.model.layers >= 1, "gcn.layers must be at least 1");
    require(k.model.dropout >= 0.0 && k.model.dropout < 1.0, "gcn.dropout must lie in [0, 1)");
    require(k.model.fd_t > 0.0, "gcn.fd_t must be positive");
    k.seed = c.seed;
    k.curvature = c.curvature;
  } else {
    auto& k = c.transformer;
    read_optim(t, k.optim);
    k.epochs = epochs;
    k.eval_interval = eval_interval;
    k.patience = patience;
    k.steps_per_epoch = t.at("steps_per_epoch").get<std::size_t>();
    k.batch_size = t.at("batch_size").get<std::size_t>();
    k.eval_sequences = t.at("eval_sequences").get<std::size_t>();
    require(k.steps_per_epoch >= 1 && k.batch_size >= 1 && k.eval_sequences >= 1,
            "train.steps_per_epoch, train.batch_size and train.eval_sequences must be at least 1");
    const json& m = j.at("transformer");
    require(dim >= 2, "dim must be at least 2 for the transformer");
    k.model.dim = dim;
    k.model.heads = m.at("heads").get<std::size_t>();
    k.model.layers = m.at("layers").get<std::size_t>();
    k.model.ff_dim = m.at("ff_dim").get<std::size_t>();
    k.model.max_len = m.at("max_len").get<std::size_t>();
    k.model.dropout = m.at("dropout").get<double>();
    k.model.embed_scale = m.at("embed_scale").get<double>();
    k.task.symbols = m.at("symbols").get<std::size_t>();
    k.task.period = m.at("period").get<std::size_t>();
    require(k.model.heads >= 1 && k.model.ff_dim >= 1, "transformer.heads and transformer.ff_dim must be at least 1");
    require(k.model.max_len >= 2, "transformer.max_len must be at least 2");
    require(k.model.dropout >= 0.0 && k.model.dropout < 1.0, "transformer.dropout must lie in [0, 1)");
    require(k.model.embed_scale > 0.0, "transformer.embed_scale must be positive");
    require(k.task.symbols >= 2 && k.task.period >= 1 && k.task.period <= k.task.symbols,
            "transformer.symbols must be >= 2 and transformer.period must lie in [1, symbols]");
    k.model.vocab = k.task.symbols + 1;
    k.seed = c.seed;
    k.curvature = c.curvature;
  }
  return c;
}

}  // namespace

json to_json(const RunConfig& c) {
  json j;
  j["model"] = model_name(c.model);
  j["precision"] = c.precision == Precision::f32 ? "f32" : "f64";
  j["seed"] = c.seed;
  j["curvature"] = c.curvature;
  if (c.model == ModelKind::kg) {
    const auto& k = c.kg;
    j["dim"] = k.model.dim;
    j["data"] = c.data ? json(*c.data) : json(nullptr);
    j["generator"] = {{"branching", c.generator.branching}, {"depth", c.generator.depth}};
    json t = optim_json(k.optim);
    t["epochs"] = k.epochs;
    t["batch_size"] = k.batch_size;
    t["negatives"] = k.negatives;
    t["eval_interval"] = k.eval_interval;
    t["patience"] = k.patience;
    j["train"] = t;
    j["kg"] = {{"margin", k.model.margin},
               {"init_scale", k.model.init_scale},
               {"transform", k.model.transform == models::RelationTransform::fx ? "fx" : "linear"},
               {"lambda", k.model.lambda}};
  } else if (c.model == ModelKind::gcn) {
    const auto& k = c.gcn;
    j["dim"] = k.model.dim;
    j["data"] = c.data ? json(*c.data) : json(nullptr);
    j["generator"] = {{"kind", c.generator.kind},
                      {"branching", c.generator.branching},
                      {"depth", c.generator.depth},
                      {"size", c.generator.size}};
    json t = optim_json(k.optim);
    t["epochs"] = k.epochs;
    t["eval_interval"] = k.eval_interval;
    t["patience"] = k.patience;
    t["valid_fraction"] = k.valid_fraction;
    t["test_fraction"] = k.test_fraction;
    j["train"] = t;
    j["gcn"] = {{"task", k.model.task == models::GcnTask::link_prediction ? "lp" : "nc"},
                {"layers", k.model.layers},
                {"self_loops", k.model.self_loops},
                {"dropout", k.model.dropout},
                {"fd_r", k.model.fd_r},
                {"fd_t", k.model.fd_t}};
  } else {
    const auto& k = c.transformer;
    j["dim"] = k.model.dim;
    json t = optim_json(k.optim);
    t["epochs"] = k.epochs;
    t["steps_per_epoch"] = k.steps_per_epoch;
    t["batch_size"] = k.batch_size;
    t["eval_sequences"] = k.eval_sequences;
    t["eval_interval"] = k.eval_interval;
    t["patience"] = k.patience;
    j["train"] = t;
    j["transformer"] = {{"heads", k.model.heads},         {"layers", k.model.layers},
                        {"ff_dim", k.model.ff_dim},       {"max_len", k.model.max_len},
                        {"dropout", k.model.dropout},     {"embed_scale", k.model.embed_scale},
                        {"symbols", k.task.symbols},      {"period", k.task.period}};
  }
  return j;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* s = std::getenv("HYBOLIB_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  const std::string v(s);
  if (v.find_first_not_of("0123456789") != std::string::npos || v.size() > 20) {
    throw ConfigError("HYBOLIB_SEED must be a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError("HYBOLIB_SEED out of range: '" + v + "'");
  }
}

RunConfig parse_run_config(const json& document) {
  if (!document.is_object()) throw ConfigError("configuration must be a JSON object");
  std::string model = "kg";
  if (document.contains("model")) {
    if (!document.at("model").is_string()) throw ConfigError("'model' must be a string");
    model = document.at("model").get<std::string>();
  }
  json merged = to_json(default_config(parse_model(model)));
  merge(merged, document, "");
  if (!document.contains("seed")) {
    if (auto env = seed_from_env()) merged["seed"] = *env;
  }
  try {
    return from_json(merged);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration error: ") + e.what());
  }
}

void apply_override(RunConfig& config, const std::string& dotted_key, const json& value) {
  if (dotted_key.empty()) throw ConfigError("empty override key");
  if (dotted_key == "model") throw ConfigError("the model kind cannot be overridden");
  json j = to_json(config);
  json patch = value;
  std::string rest = dotted_key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1)) {
    parts.push_back(rest.substr(0, pos));
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  merge(j, patch, "");
  try {
    config = from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration error: ") + e.what());
  }
}

data::TripletStore load_kg_data(const RunConfig& c) {
  if (c.data) return data::load_triplets(*c.data);
  return data::gen_tree_kg(c.generator.branching, c.generator.depth, c.seed);
}

data::Graph load_graph_data(const RunConfig& c) {
  if (c.data) {
    if (fs::is_directory(*c.data)) return data::load_graph_dir(*c.data);
    return data::load_edge_list(*c.data);
  }
  data::ToyGraphOptions o;
  o.kind = c.generator.kind == "barbell" ? data::GraphKind::barbell : data::GraphKind::tree;
  o.branching = c.generator.branching;
  o.depth = c.generator.depth;
  o.size = c.generator.size;
  return data::gen_toy_graph(o, c.seed);
}

namespace {

json status_json(const RunConfig& c, const train::RunStatus& s) {
  json j{{"model", model_name(c.model)},
         {"precision", c.precision == Precision::f32 ? "f32" : "f64"},
         {"seed", c.seed},
         {"epochs_run", s.log.size()},
         {"best_epoch", s.best_epoch},
         {"best_valid", s.best_valid},
         {"test", s.test_metrics}};
  j["aborted"] = s.aborted ? json(*s.aborted) : json(nullptr);
  return j;
}

json checkpoint_meta(const RunConfig& c, const train::RunStatus& s) {
  return {{"format", "hybo-run"}, {"config", to_json(c)}, {"best_epoch", s.best_epoch}, {"best_valid", s.best_valid}};
}

template <typename T>
TrainOutcome train_typed(const RunConfig& c, const train::LogSink& sink) {
  TrainOutcome out;
  auto finish = [&](const auto& run) {
    out.summary = status_json(c, run.status);
    out.checkpoint = nn::snapshot(run.store, checkpoint_meta(c, run.status));
    out.aborted = run.status.aborted.has_value();
  };
  if (c.model == ModelKind::kg) {
    const auto data = load_kg_data(c);
    const auto run = train::train_kg<T>(c.kg, data, sink);
    finish(run);
  } else if (c.model == ModelKind::gcn) {
    const auto graph = load_graph_data(c);
    const auto run = train::train_gcn<T>(c.gcn, graph, sink);
    finish(run);
  } else {
    const auto run = train::train_transformer<T>(c.transformer, sink);
    finish(run);
    out.summary["max_manifold_error"] = run.max_manifold_error;
    out.summary["time_positive"] = run.time_positive;
  }
  return out;
}

json rank_json(const std::string& split, const models::RankMetrics& m) {
  return {{"split", split}, {"mrr", m.mrr}, {"hits1", m.hits1}, {"hits3", m.hits3}, {"hits10", m.hits10},
          {"queries", m.queries}};
}

template <typename T>
json evaluate_typed(const RunConfig& c, const nn::Checkpoint& ckpt, const std::string& split) {
  const bool valid = split == "valid";
  if (c.model == ModelKind::kg) {
    const auto data = load_kg_data(c);
    auto cfg = c.kg;
    cfg.epochs = 0;
    auto run = train::train_kg<T>(cfg, data);
    nn::restore(run.store, ckpt);
    nn::Bound<T> params(run.store);
    const auto& queries = valid ? data.valid : data.test;
    if (queries.empty()) throw data::DataError("the " + split + " split is empty");
    return rank_json(split, run.model.evaluate(params, queries, &data));
  }
  if (c.model == ModelKind::gcn) {
    const auto graph = load_graph_data(c);
    auto cfg = c.gcn;
    cfg.epochs = 0;
    auto run = train::train_gcn<T>(cfg, graph);
    nn::restore(run.store, ckpt);
    if (cfg.model.task == models::GcnTask::link_prediction) {
      const auto& pos = valid ? run.links.valid_pos : run.links.test_pos;
      const auto& neg = valid ? run.links.valid_neg : run.links.test_neg;
      return {{"split", split}, {"roc_auc", train::gcn_link_auc(run.model, run.store, graph, run.links.train, pos, neg)}};
    }
    return {{"split", split}, {"f1", train::gcn_node_f1(run.model, run.store, graph, valid ? run.nodes.valid : run.nodes.test)}};
  }
  auto cfg = c.transformer;
  cfg.epochs = 0;
  auto run = train::train_transformer<T>(cfg);
  nn::restore(run.store, ckpt);
  // Same evaluation streams as the trainer: seed + 1 validates, seed + 2 tests.
  std::mt19937_64 rng(cfg.seed + (valid ? 1 : 2));
  const auto batch = train::sample_masked_batch(cfg.task, run.model.config().max_len, cfg.eval_sequences, rng);
  json j = train::transformer_accuracy(run.model, run.store, batch);
  j["split"] = split;
  return j;
}

}  // namespace

TrainOutcome run_training(const RunConfig& config, const train::LogSink& sink) {
  return config.precision == Precision::f32 ? train_typed<float>(config, sink) : train_typed<double>(config, sink);
}

json evaluate_checkpoint(const nn::Checkpoint& checkpoint, const std::optional<std::string>& data,
                         const std::string& split) {
  if (split != "valid" && split != "test") throw ConfigError("split must be valid or test, got '" + split + "'");
  if (!checkpoint.meta.contains("config")) throw nn::CheckpointError("checkpoint carries no run configuration");
  RunConfig c = parse_run_config(checkpoint.meta.at("config"));
  if (data) {
    if (c.model == ModelKind::transformer) throw ConfigError("the toy transformer uses synthetic data only");
    c.data = *data;
  }
  const std::uint32_t width = c.precision == Precision::f32 ? 4 : 8;
  if (checkpoint.scalar_bytes != width) throw nn::CheckpointError("checkpoint scalar width disagrees with its precision");
  json out = c.precision == Precision::f32 ? evaluate_typed<float>(c, checkpoint, split)
                                           : evaluate_typed<double>(c, checkpoint, split);
  out["model"] = model_name(c.model);
  return out;
}

json generate_dataset(const std::string& kind, const GeneratorSpec& spec, std::uint64_t seed,
                      const std::string& out_dir) {
  const fs::path out(out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw data::DataError("cannot create output directory '" + out_dir + "'");
  json manifest{{"kind", kind}, {"seed", seed}};
  if (kind == "tree-kg") {
    data::TreeKgInfo info;
    const auto store = data::gen_tree_kg(spec.branching, spec.depth, seed, &info);
    data::write_triplets(store, out);
    manifest["branching"] = spec.branching;
    manifest["depth"] = spec.depth;
    manifest["entities"] = store.num_entities();
    manifest["relations"] = store.base_relations();
    manifest["edges"] = info.edges;
    manifest["train"] = info.train;
    manifest["valid"] = info.valid;
    manifest["test"] = info.test;
    manifest["files"] = {"train.txt", "valid.txt", "test.txt"};
  } else if (kind == "tree-graph" || kind == "barbell") {
    data::ToyGraphOptions o;
    o.kind = kind == "barbell" ? data::GraphKind::barbell : data::GraphKind::tree;
    o.branching = spec.branching;
    o.depth = spec.depth;
    o.size = spec.size;
    const auto g = data::gen_toy_graph(o, seed);
    data::write_graph_dir(g, out);
    if (kind == "barbell") {
      manifest["size"] = spec.size;
    } else {
      manifest["branching"] = spec.branching;
      manifest["depth"] = spec.depth;
    }
    manifest["nodes"] = g.num_nodes;
    manifest["edges"] = g.edges.size();
    manifest["feature_dim"] = g.feature_dim;
    manifest["classes"] = g.num_classes;
    manifest["files"] = {"edges.tsv", "features.tsv", "labels.tsv"};
  } else {
    throw ConfigError("unknown dataset kind '" + kind + "' (expected tree-kg, tree-graph or barbell)");
  }
  std::ofstream m(out / "manifest.json", std::ios::trunc);
  m << manifest.dump(2) << '\n';
  if (!m) throw data::DataError("cannot write manifest in '" + out_dir + "'");
  return manifest;
}

}  // namespace hybo::app
