#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "hybo/app/run.hpp"
#include "hybo/verify/suites.hpp"

using namespace hybo;
using namespace hybo::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hybo_app_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Sets or clears HYBOLIB_SEED for one scope.
class EnvSeed {
 public:
  explicit EnvSeed(const char* value) {
    if (value) {
      setenv("HYBOLIB_SEED", value, 1);
    } else {
      unsetenv("HYBOLIB_SEED");
    }
  }
  ~EnvSeed() { unsetenv("HYBOLIB_SEED"); }
};

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  EnvSeed env(nullptr);
  for (auto m : {ModelKind::kg, ModelKind::gcn, ModelKind::transformer}) {
    const auto j = to_json(default_config(m));
    EXPECT_EQ(j.at("model"), model_name(m));
    EXPECT_EQ(to_json(parse_run_config(j)), j);
  }
}

TEST(Config, KgDefaultsMatchScaledTable) {
  const auto c = default_config(ModelKind::kg);
  EXPECT_EQ(c.kg.model.dim, 16u);
  EXPECT_DOUBLE_EQ(c.kg.optim.lr, 5e-3);
  EXPECT_DOUBLE_EQ(c.kg.model.margin, 8.0);
  EXPECT_DOUBLE_EQ(c.kg.model.lambda, 2.5);
  EXPECT_DOUBLE_EQ(c.kg.optim.max_norm, 1.5);
  EXPECT_EQ(c.kg.epochs, 500u);
  EXPECT_EQ(c.seed, 42u);
}

TEST(Config, UnknownKeysAndBadTypesRejected) {
  EXPECT_THROW(parse_run_config(json{{"model", "kg"}, {"bogus", 1}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"model", "kg"}, {"train", {{"lr2", 1}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"model", "kg"}, {"train", {{"lr", "fast"}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"model", "kg"}, {"train", {{"epochs", -3}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"model", "kg"}, {"gcn", json::object()}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"model", "resnet"}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"model", "kg"}, {"precision", "f16"}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"model", "kg"}, {"curvature", 1.0}}), ConfigError);
  EXPECT_THROW(parse_run_config(json{{"model", "kg"}, {"train", {{"lr", 0.0}}}}), ConfigError);
  EXPECT_THROW(parse_run_config(json::array()), ConfigError);
}

TEST(Config, SectionsOverride) {
  const auto c = parse_run_config(json{{"model", "gcn"},
                                       {"dim", 8},
                                       {"precision", "f32"},
                                       {"train", {{"lr", 0.02}, {"epochs", 3}}},
                                       {"gcn", {{"task", "nc"}}}});
  EXPECT_EQ(c.model, ModelKind::gcn);
  EXPECT_EQ(c.precision, Precision::f32);
  EXPECT_EQ(c.gcn.model.dim, 8u);
  EXPECT_DOUBLE_EQ(c.gcn.optim.lr, 0.02);
  EXPECT_EQ(c.gcn.epochs, 3u);
  EXPECT_EQ(c.gcn.model.task, models::GcnTask::node_classification);
}

TEST(Config, SeedPrecedence) {
  {
    EnvSeed env(nullptr);
    EXPECT_EQ(parse_run_config(json{{"model", "kg"}}).seed, 42u);
  }
  {
    EnvSeed env("17");
    EXPECT_EQ(parse_run_config(json{{"model", "kg"}}).seed, 17u);
    EXPECT_EQ(parse_run_config(json{{"model", "kg"}, {"seed", 5}}).seed, 5u);
    auto c = parse_run_config(json{{"model", "kg"}, {"seed", 5}});
    apply_override(c, "seed", 9);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.kg.seed, 9u);
  }
  {
    EnvSeed env("x1");
    EXPECT_THROW(parse_run_config(json{{"model", "kg"}}), ConfigError);
  }
}

TEST(Config, DottedOverrides) {
  auto c = default_config(ModelKind::kg);
  apply_override(c, "train.lr", 0.25);
  apply_override(c, "kg.transform", "linear");
  apply_override(c, "train.optimizer", "rsgd");
  EXPECT_DOUBLE_EQ(c.kg.optim.lr, 0.25);
  EXPECT_EQ(c.kg.model.transform, models::RelationTransform::linear);
  EXPECT_EQ(c.kg.optim.kind, train::OptimizerKind::rsgd);
  EXPECT_THROW(apply_override(c, "model", "gcn"), ConfigError);
  EXPECT_THROW(apply_override(c, "train.nope", 1), ConfigError);
  EXPECT_THROW(apply_override(c, "kg.transform", "cubic"), ConfigError);
  EXPECT_THROW(apply_override(c, "", 1), ConfigError);
}

TEST(Checkpoint, WriteReadRestore) {
  const auto dir = scratch("ckpt");
  nn::ParameterStore<double> a;
  a.add("w", nn::Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6.5}));
  a.add("e", nn::Tensor<double>({1, 2}, {0.1, -0.2}), nn::ParamKind::lorentz_rows);
  const auto c = nn::snapshot(a, json{{"note", "x"}});
  nn::write_checkpoint((dir / "c.bin").string(), c);
  const auto r = nn::read_checkpoint((dir / "c.bin").string());
  EXPECT_EQ(r.meta.at("note"), "x");
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_EQ(r.entries[1].kind, nn::ParamKind::lorentz_rows);

  nn::ParameterStore<double> b;
  b.add("w", nn::Tensor<double>::zeros({2, 3}));
  b.add("e", nn::Tensor<double>::zeros({1, 2}), nn::ParamKind::lorentz_rows);
  nn::restore(b, r);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto x = a.entry(i).value.values(), y = b.entry(i).value.values();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
  }

  nn::ParameterStore<double> wrong;
  wrong.add("w", nn::Tensor<double>::zeros({3, 2}));
  wrong.add("e", nn::Tensor<double>::zeros({1, 2}), nn::ParamKind::lorentz_rows);
  EXPECT_THROW(nn::restore(wrong, r), nn::CheckpointError);
}

TEST(Checkpoint, CorruptFilesRejected) {
  const auto dir = scratch("ckpt_bad");
  std::ofstream(dir / "junk.bin") << "not a checkpoint";
  EXPECT_THROW(nn::read_checkpoint((dir / "junk.bin").string()), nn::CheckpointError);
  EXPECT_THROW(nn::read_checkpoint((dir / "missing.bin").string()), nn::CheckpointError);

  nn::ParameterStore<float> s;
  s.add("w", nn::Tensor<float>({4, 1}, {1, 2, 3, 4}));
  nn::write_checkpoint((dir / "ok.bin").string(), nn::snapshot(s, json::object()));
  const std::string bytes = slurp(dir / "ok.bin");
  std::ofstream(dir / "cut.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  EXPECT_THROW(nn::read_checkpoint((dir / "cut.bin").string()), nn::CheckpointError);
  EXPECT_EQ(nn::read_checkpoint((dir / "ok.bin").string()).scalar_bytes, 4u);
}

TEST(RunTraining, KgCheckpointEvaluatesToRecordedBest) {
  auto c = default_config(ModelKind::kg);
  c.kg.epochs = 30;
  const auto out = run_training(c);
  EXPECT_FALSE(out.aborted);
  const auto m = evaluate_checkpoint(out.checkpoint, std::nullopt, "valid");
  EXPECT_DOUBLE_EQ(m.at("mrr").get<double>(), out.summary.at("best_valid").get<double>());
  const auto t = evaluate_checkpoint(out.checkpoint, std::nullopt, "test");
  EXPECT_DOUBLE_EQ(t.at("mrr").get<double>(), out.summary.at("test").at("mrr").get<double>());
  EXPECT_THROW(evaluate_checkpoint(out.checkpoint, std::nullopt, "train"), ConfigError);
}

TEST(RunTraining, UntrainedKgNearRandomBaseline) {
  // Expected filtered MRR of an uninformed scorer, averaged over seeds: the
  // harmonic oracle over 40 candidates is about 0.107.
  double sum = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    auto c = default_config(ModelKind::kg);
    c.seed = static_cast<std::uint64_t>(s);
    c.kg.seed = c.seed;
    c.kg.epochs = 0;
    const auto out = run_training(c);
    sum += evaluate_checkpoint(out.checkpoint, std::nullopt, "test").at("mrr").get<double>();
  }
  EXPECT_NEAR(sum / seeds, 0.107, 0.05);
}

TEST(RunTraining, GcnAndTransformerSmoke) {
  auto g = default_config(ModelKind::gcn);
  g.gcn.epochs = 5;
  const auto go = run_training(g);
  EXPECT_TRUE(go.summary.at("test").contains("roc_auc"));
  EXPECT_NO_THROW(evaluate_checkpoint(go.checkpoint, std::nullopt, "test"));

  auto t = default_config(ModelKind::transformer);
  t.transformer.epochs = 1;
  t.transformer.steps_per_epoch = 2;
  t.transformer.eval_sequences = 16;
  const auto to = run_training(t);
  EXPECT_LT(to.summary.at("max_manifold_error").get<double>(), 1e-9);
  EXPECT_TRUE(to.summary.at("time_positive").get<bool>());
  EXPECT_NO_THROW(evaluate_checkpoint(to.checkpoint, std::nullopt, "valid"));
}

TEST(Generate, ManifestAndDeterminism) {
  const auto a = scratch("gen_a"), b = scratch("gen_b");
  GeneratorSpec spec;
  const auto m = generate_dataset("tree-kg", spec, 3, a.string());
  generate_dataset("tree-kg", spec, 3, b.string());
  EXPECT_EQ(m.at("entities"), 40);
  EXPECT_EQ(m.at("seed"), 3);
  EXPECT_EQ(m.at("edges"), 39);
  for (const char* f : {"train.txt", "valid.txt", "test.txt", "manifest.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_THROW(generate_dataset("lattice", spec, 3, a.string()), ConfigError);
  EXPECT_THROW(generate_dataset("tree-kg", spec, 3, "/proc/hybo_nope"), data::DataError);
}

TEST(Generate, GraphDataFeedsTraining) {
  const auto dir = scratch("gen_graph");
  GeneratorSpec spec;
  spec.branching = 2;
  spec.depth = 5;
  const auto m = generate_dataset("tree-graph", spec, 1, dir.string());
  EXPECT_EQ(m.at("nodes"), 63);
  EXPECT_EQ(m.at("edges"), 62);
  auto c = default_config(ModelKind::gcn);
  c.data = dir.string();
  c.gcn.epochs = 2;
  EXPECT_NO_THROW(run_training(c));
}

TEST(Verify, EverySuitePassesAtSmallScale) {
  for (const auto& name : verify::suite_names()) {
    const auto r = verify::run_suite(name, 7, 20);
    EXPECT_TRUE(r.passed()) << r.to_json().dump(2);
    EXPECT_FALSE(r.checks.empty()) << name;
  }
}

TEST(Verify, ZeroTrialsPassVacuouslyWithWarning) {
  const auto r = verify::run_suite("lemma1", 1, 0);
  EXPECT_TRUE(r.passed());
  ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(Verify, UnknownSuiteAndAll) {
  EXPECT_THROW(verify::run_suite("lemma9", 1, 1), std::invalid_argument);
  EXPECT_EQ(verify::run_suites("all", 1, 0).size(), verify::suite_names().size());
}

TEST(Verify, Lemma1ReportsTinyError) {
  const auto r = verify::run_suite("lemma1", 3, 50);
  for (const auto& c : r.checks) EXPECT_LT(c.max_error, 1e-9) << c.name;
}
