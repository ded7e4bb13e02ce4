// Command-line front end over the C API. JSON results go to stdout, human
// progress to stderr. Exit codes: 0 ok, 1 verification failure, 2 usage,
// configuration or I/O error, 3 numerical abort.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybo/hybo.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheck = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

int exit_code(hybo_status s) {
  switch (s) {
    case HYBO_OK:
      return kExitOk;
    case HYBO_CHECK_FAILED:
      return kExitCheck;
    case HYBO_NUMERICAL:
      return kExitNumerical;
    default:
      return kExitUsage;
  }
}

// Owns a string handed out by the library.
struct CString {
  char* p = nullptr;
  ~CString() { hybo_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct ConfigDeleter {
  void operator()(hybo_config* c) const { hybo_config_free(c); }
};
struct RunDeleter {
  void operator()(hybo_run* r) const { hybo_run_free(r); }
};
using ConfigPtr = std::unique_ptr<hybo_config, ConfigDeleter>;
using RunPtr = std::unique_ptr<hybo_run, RunDeleter>;

int report(hybo_status s, const std::string& what) {
  std::cerr << "hybo: " << what << ": " << hybo_last_error() << "\n";
  return exit_code(s);
}

// --seed beats HYBOLIB_SEED, which beats 42.
std::optional<std::uint64_t> env_seed(std::string& error) {
  const char* v = std::getenv("HYBOLIB_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  std::uint64_t out = 0;
  const std::string s(v);
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || end != s.data() + s.size()) {
    error = "HYBOLIB_SEED must be an unsigned integer, got '" + s + "'";
    return std::nullopt;
  }
  return out;
}

std::string config_defaults_text() {
  std::ostringstream out;
  out << "Configuration defaults (keys accepted by --config and --set):\n";
  for (const char* model : {"kg", "gcn", "toy-transformer"}) {
    hybo_config* raw = nullptr;
    if (hybo_config_default(model, &raw) != HYBO_OK) continue;
    ConfigPtr cfg(raw);
    CString text;
    if (hybo_config_to_json(cfg.get(), &text.p) == HYBO_OK) out << "\n" << model << ":\n" << text.str() << "\n";
  }
  return out.str();
}

struct VerifyArgs {
  std::string suite = "all";
  std::optional<std::uint64_t> seed;
  std::size_t trials = 1000;
};

int cmd_verify(const VerifyArgs& a) {
  std::string env_error;
  const auto env = env_seed(env_error);
  if (!env_error.empty()) {
    std::cerr << "hybo: " << env_error << "\n";
    return kExitUsage;
  }
  const std::uint64_t seed = a.seed ? *a.seed : env.value_or(42);
  CString out;
  const hybo_status s = hybo_verify(a.suite.c_str(), seed, a.trials, &out.p);
  if (s != HYBO_OK && s != HYBO_CHECK_FAILED) return report(s, "verify");
  const json rep = json::parse(out.str());
  for (const auto& suite : rep["suites"]) {
    for (const auto& w : suite.value("warnings", json::array())) {
      std::cerr << "warning: " << w.get<std::string>() << "\n";
    }
    for (const auto& c : suite["checks"]) {
      std::cerr << (c["passed"].get<bool>() ? "ok   " : "FAIL ") << suite["suite"].get<std::string>() << "/"
                << c["name"].get<std::string>() << "  max_error=" << c["max_error"].dump()
                << " tol=" << c["tolerance"].dump();
      if (c.contains("detail")) std::cerr << "  (" << c["detail"].get<std::string>() << ")";
      std::cerr << "\n";
    }
  }
  std::cout << rep.dump(2) << "\n";
  if (s == HYBO_CHECK_FAILED) std::cerr << "hybo: verification failed: " << hybo_last_error() << "\n";
  return exit_code(s);
}

struct GenArgs {
  std::string kind;
  std::optional<std::size_t> branching, depth, size;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_gen(const GenArgs& a) {
  std::string env_error;
  const auto env = env_seed(env_error);
  if (!env_error.empty()) {
    std::cerr << "hybo: " << env_error << "\n";
    return kExitUsage;
  }
  json opts = json::object();
  if (a.branching) opts["branching"] = *a.branching;
  if (a.depth) opts["depth"] = *a.depth;
  if (a.size) opts["size"] = *a.size;
  const std::string opts_text = opts.dump();
  CString out;
  const hybo_status s =
      hybo_generate(a.kind.c_str(), opts_text.c_str(), a.seed ? *a.seed : env.value_or(42), a.out.c_str(), &out.p);
  if (s != HYBO_OK) return report(s, "gen");
  std::cerr << "wrote " << a.kind << " dataset to " << a.out << "\n";
  std::cout << json::parse(out.str()).dump(2) << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string model;
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string precision;
  std::string out = "run";
  bool quiet = false;
};

struct LogContext {
  std::ofstream* file;
  bool quiet;
};

void on_epoch(const char* line, void* user) {
  auto* ctx = static_cast<LogContext*>(user);
  *ctx->file << line << "\n";
  ctx->file->flush();
  if (ctx->quiet) return;
  const json r = json::parse(line);
  if (r["metric"].empty()) return;
  std::cerr << "epoch " << r["epoch"].get<long long>() << "  loss " << r["loss"].dump() << "  valid "
            << r["metric"].dump() << "  " << r["wall_ms"].dump() << " ms\n";
}

int cmd_train(const TrainArgs& a) {
  json doc = json::object();
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) {
      std::cerr << "hybo: cannot read config '" << a.config_path << "'\n";
      return kExitUsage;
    }
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      std::cerr << "hybo: config '" << a.config_path << "' is not valid JSON: " << e.what() << "\n";
      return kExitUsage;
    }
    if (!doc.is_object()) {
      std::cerr << "hybo: config must be a JSON object\n";
      return kExitUsage;
    }
  }
  if (doc.contains("model") && doc["model"] != a.model) {
    std::cerr << "hybo: config is for model " << doc["model"].dump() << " but '" << a.model << "' was requested\n";
    return kExitUsage;
  }
  doc["model"] = a.model;
  const std::string text = doc.dump();
  hybo_config* raw = nullptr;
  hybo_status s = hybo_config_parse(text.c_str(), &raw);
  if (s != HYBO_OK) return report(s, "config");
  ConfigPtr cfg(raw);

  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "hybo: --set expects key=value, got '" << kv << "'\n";
      return kExitUsage;
    }
    s = hybo_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != HYBO_OK) return report(s, "--set " + kv);
  }
  if (a.seed) {
    s = hybo_config_set(cfg.get(), "seed", std::to_string(*a.seed).c_str());
    if (s != HYBO_OK) return report(s, "--seed");
  }
  if (!a.precision.empty()) {
    s = hybo_config_set(cfg.get(), "precision", json(a.precision).dump().c_str());
    if (s != HYBO_OK) return report(s, "--precision");
  }

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) {
    std::cerr << "hybo: cannot create output directory '" << a.out << "': " << ec.message() << "\n";
    return kExitUsage;
  }
  {
    CString resolved;
    if (hybo_config_to_json(cfg.get(), &resolved.p) == HYBO_OK) {
      std::ofstream(fs::path(a.out) / "config.json") << resolved.str() << "\n";
    }
  }
  std::ofstream log(fs::path(a.out) / "log.jsonl", std::ios::trunc);
  if (!log) {
    std::cerr << "hybo: cannot write log in '" << a.out << "'\n";
    return kExitUsage;
  }
  LogContext ctx{&log, a.quiet};
  hybo_run* run_raw = nullptr;
  const hybo_status trained = hybo_train(cfg.get(), on_epoch, &ctx, &run_raw);
  RunPtr run(run_raw);
  if (!run) return report(trained, "train");
  const std::string error = trained == HYBO_OK ? "" : hybo_last_error();

  const std::string ckpt = (fs::path(a.out) / "checkpoint.hybo").string();
  s = hybo_run_save(run.get(), ckpt.c_str());
  if (s != HYBO_OK) return report(s, "saving checkpoint");
  CString summary;
  s = hybo_run_summary(run.get(), &summary.p);
  if (s != HYBO_OK) return report(s, "summary");
  json sum = json::parse(summary.str());
  sum["checkpoint"] = ckpt;
  std::ofstream(fs::path(a.out) / "summary.json") << sum.dump(2) << "\n";
  std::cout << sum.dump(2) << "\n";
  if (trained != HYBO_OK) {
    std::cerr << "hybo: " << error << "\n";
    std::cerr << "hybo: checkpoint holds the last finite parameters\n";
    return exit_code(trained);
  }
  std::cerr << "best epoch " << sum["best_epoch"].dump() << ", checkpoint " << ckpt << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model;
  std::string checkpoint;
  std::string data;
  std::string split = "test";
};

int cmd_eval(const EvalArgs& a) {
  CString out;
  const hybo_status s =
      hybo_evaluate(a.checkpoint.c_str(), a.data.empty() ? nullptr : a.data.c_str(), a.split.c_str(), &out.p);
  if (s != HYBO_OK) return report(s, "eval");
  json metrics = json::parse(out.str());
  if (!a.model.empty() && metrics.contains("model") && metrics["model"] != a.model) {
    std::cerr << "hybo: checkpoint holds a " << metrics["model"].get<std::string>() << " model, not " << a.model << "\n";
    return kExitUsage;
  }
  std::cout << metrics.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fully hyperbolic networks in the Lorentz model: checks, toy data, training and evaluation"};
  app.set_version_flag("--version", std::string(hybo_version()));
  app.require_subcommand(1);

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run numerical property suites; exit 1 if any check fails");
  verify->add_option("--suite", va.suite, "manifold, theorem1, lemma1, lemma2, centroid, gradients or all")
      ->capture_default_str();
  verify->add_option("--seed", va.seed, "Random seed (default: HYBOLIB_SEED, else 42)");
  verify->add_option("--trials", va.trials, "Random instances per check")->capture_default_str();

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Write a synthetic dataset and manifest.json");
  gen->add_option("kind", ga.kind, "tree-kg, tree-graph or barbell")
      ->required()
      ->check(CLI::IsMember({"tree-kg", "tree-graph", "barbell"}));
  gen->add_option("--branching", ga.branching, "Tree branching factor (default 3 for tree-kg, 2 for tree-graph)");
  gen->add_option("--depth", ga.depth, "Tree depth (default 3 for tree-kg, 5 for tree-graph)");
  gen->add_option("--size", ga.size, "Clique size for barbell (default 8)");
  gen->add_option("--out", ga.out, "Output directory")->required();
  gen->add_option("--seed", ga.seed, "Random seed (default: HYBOLIB_SEED, else 42)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model; writes checkpoint.hybo, log.jsonl and summary.json");
  train->add_option("model", ta.model, "kg, gcn or toy-transformer")
      ->required()
      ->check(CLI::IsMember({"kg", "gcn", "toy-transformer"}));
  train->add_option("--config", ta.config_path, "JSON configuration file");
  train->add_option("--set", ta.sets, "Override one key, e.g. --set train.lr=0.01 (repeatable)");
  train->add_option("--seed", ta.seed, "Random seed (default: config, else HYBOLIB_SEED, else 42)");
  train->add_option("--precision", ta.precision, "f32 or f64 (default f64)")->check(CLI::IsMember({"f32", "f64"}));
  train->add_option("--out", ta.out, "Output directory")->capture_default_str();
  train->add_flag("--quiet", ta.quiet, "No progress on stderr");
  train->footer(config_defaults_text());

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and print metrics JSON");
  eval->add_option("model", ea.model, "Expected model kind (optional)")
      ->check(CLI::IsMember({"kg", "gcn", "toy-transformer"}));
  eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint written by train")->required();
  eval->add_option("--data", ea.data, "Data replacing the source recorded in the checkpoint");
  eval->add_option("--split", ea.split, "valid or test")->capture_default_str()->check(CLI::IsMember({"valid", "test"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(va);
    if (*gen) return cmd_gen(ga);
    if (*train) return cmd_train(ta);
    if (*eval) return cmd_eval(ea);
  } catch (const std::exception& e) {
    std::cerr << "hybo: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
