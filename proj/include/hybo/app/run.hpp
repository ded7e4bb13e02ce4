#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "hybo/data/datasets.hpp"
#include "hybo/nn/checkpoint.hpp"
#include "hybo/train/trainers.hpp"

namespace hybo::app {

using json = nlohmann::json;

// Invalid run configuration: unknown key, wrong type or out-of-range value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ModelKind { kg, gcn, transformer };
enum class Precision { f32, f64 };

std::string model_name(ModelKind m);
ModelKind parse_model(const std::string& name);

// Synthetic data used when no data path is configured. `kind` is "tree-kg"
// for KG runs and "tree" or "barbell" for GCN runs.
struct GeneratorSpec {
  std::string kind = "tree-kg";
  std::size_t branching = 3;
  std::size_t depth = 3;
  std::size_t size = 8;
};

struct RunConfig {
  ModelKind model = ModelKind::kg;
  Precision precision = Precision::f64;
  std::uint64_t seed = 42;
  double curvature = -1.0;
  std::optional<std::string> data;
  GeneratorSpec generator;
  train::KgTrainConfig kg;
  train::GcnTrainConfig gcn;
  train::TransformerTrainConfig transformer;
};

RunConfig default_config(ModelKind model);

// JSON view of a configuration; only the sections relevant to its model.
json to_json(const RunConfig& config);

// Parses a configuration document. "model" selects the defaults that the
// document then overrides; keys absent from those defaults are rejected.
// Without a "seed" key, HYBOLIB_SEED (when set) replaces the default seed.
RunConfig parse_run_config(const json& document);

// Sets one dotted key ("train.lr", "seed") and re-validates.
void apply_override(RunConfig& config, const std::string& dotted_key, const json& value);

// Seed from HYBOLIB_SEED, if set and valid; throws ConfigError when malformed.
std::optional<std::uint64_t> seed_from_env();

data::TripletStore load_kg_data(const RunConfig& config);
data::Graph load_graph_data(const RunConfig& config);

struct TrainOutcome {
  json summary;  // best_epoch, best_valid, test metrics, aborted
  nn::Checkpoint checkpoint;
  bool aborted = false;
};

TrainOutcome run_training(const RunConfig& config, const train::LogSink& sink = {});

// Rebuilds the model recorded in the checkpoint and evaluates it on the
// given split ("valid" or "test"). `data` replaces the recorded data source.
json evaluate_checkpoint(const nn::Checkpoint& checkpoint, const std::optional<std::string>& data,
                         const std::string& split);

// Writes a synthetic dataset plus manifest.json into `out_dir` and returns
// the manifest. Kinds: tree-kg, tree-graph, barbell.
json generate_dataset(const std::string& kind, const GeneratorSpec& spec, std::uint64_t seed,
                      const std::string& out_dir);

}  // namespace hybo::app
