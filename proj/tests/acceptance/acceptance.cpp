// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any selected criterion fails. `--only N` runs one.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hybo/app/run.hpp"
#include "hybo/verify/suites.hpp"

using namespace hybo;
using app::ModelKind;
using app::Precision;

namespace {

constexpr std::uint64_t kSeed = 42;

struct Outcome {
  bool passed = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// Worst check of a suite, optionally restricted by a predicate on check names.
Outcome suite_outcome(const std::string& suite, std::size_t trials, double time_limit,
                      const std::function<bool(const std::string&)>& keep = {}) {
  Stopwatch w;
  const auto r = verify::run_suite(suite, kSeed, trials);
  const double secs = w.seconds();
  Outcome o{true, ""};
  double worst = 0.0;
  std::size_t used = 0;
  std::string failing;
  for (const auto& c : r.checks) {
    if (keep && !keep(c.name)) continue;
    ++used;
    worst = std::max(worst, c.max_error);
    if (!c.passed) {
      o.passed = false;
      failing += " " + c.name;
    }
  }
  if (used == 0) o.passed = false;
  if (time_limit > 0 && secs >= time_limit) o.passed = false;
  o.detail = std::to_string(used) + " checks, max error " + fmt(worst) + ", " + fmt(secs) + " s";
  if (time_limit > 0) o.detail += " (limit " + fmt(time_limit) + " s)";
  if (!failing.empty()) o.detail += ", failing:" + failing;
  return o;
}

bool is_roundtrip(const std::string& name) { return name.find("roundtrip") != std::string::npos; }

struct Trained {
  app::TrainOutcome outcome;
  std::vector<double> losses;
  double seconds = 0.0;
};

Trained train(ModelKind model, Precision precision) {
  auto c = app::default_config(model);
  c.precision = precision;
  Trained t;
  Stopwatch w;
  t.outcome = app::run_training(c, [&](const train::EpochRecord& r) { t.losses.push_back(r.loss); });
  t.seconds = w.seconds();
  return t;
}

Trained train_gcn_task(const std::string& task, Precision precision) {
  auto c = app::default_config(ModelKind::gcn);
  c.precision = precision;
  app::apply_override(c, "gcn.task", task);
  Trained t;
  Stopwatch w;
  t.outcome = app::run_training(c, [&](const train::EpochRecord& r) { t.losses.push_back(r.loss); });
  t.seconds = w.seconds();
  return t;
}

bool all_finite(const Trained& t) {
  for (double l : t.losses)
    if (!std::isfinite(l)) return false;
  return !t.outcome.aborted && !t.losses.empty();
}

// Cached so criteria 11 and 12 can reuse the 64-bit KG run.
const Trained& kg64() {
  static const Trained t = train(ModelKind::kg, Precision::f64);
  return t;
}

Outcome criterion_kg() {
  const auto& t = kg64();
  const auto& s = t.outcome.summary;
  const double best = s.at("best_valid").get<double>();
  // Re-evaluate the saved checkpoint rather than trusting the training log.
  const auto eval = app::evaluate_checkpoint(t.outcome.checkpoint, std::nullopt, "valid");
  const double mrr = eval.at("mrr").get<double>();
  Outcome o;
  o.passed = !t.outcome.aborted && mrr >= 0.5 && t.seconds < 300.0;
  o.detail = "valid MRR " + fmt(mrr) + " (training log " + fmt(best) + ", need >= 0.5, random ~0.107), test MRR " +
             fmt(s.at("test").at("mrr").get<double>()) + ", best epoch " + s.at("best_epoch").dump() + ", " +
             fmt(t.seconds) + " s";
  return o;
}

Outcome criterion_gcn() {
  const auto lp = train_gcn_task("lp", Precision::f64);
  const auto nc = train_gcn_task("nc", Precision::f64);
  const double auc = lp.outcome.summary.at("test").at("roc_auc").get<double>();
  const double f1 = nc.outcome.summary.at("test").at("f1").get<double>();
  const double secs = lp.seconds + nc.seconds;
  Outcome o;
  o.passed = auc >= 0.9 && f1 >= 0.8 && secs < 120.0;
  o.detail = "LP test ROC AUC " + fmt(auc) + " (need >= 0.9), NC test macro-F1 " + fmt(f1) + " (need >= 0.8), " +
             fmt(secs) + " s";
  return o;
}

Outcome criterion_transformer() {
  const auto t = train(ModelKind::transformer, Precision::f64);
  const auto& s = t.outcome.summary;
  const double acc = s.at("test").at("accuracy").get<double>();
  const double err = s.at("max_manifold_error").get<double>();
  const bool tpos = s.at("time_positive").get<bool>();
  Outcome o;
  o.passed = !t.outcome.aborted && acc >= 0.9 && err < 1e-9 && tpos && t.seconds < 300.0;
  o.detail = "test token accuracy " + fmt(acc) + " (need >= 0.9), max manifold error " + fmt(err) +
             (tpos ? "" : ", negative time coordinate seen") + ", " + fmt(t.seconds) + " s";
  return o;
}

Outcome criterion_f32() {
  const auto kg = train(ModelKind::kg, Precision::f32);
  const auto lp = train_gcn_task("lp", Precision::f32);
  const auto nc = train_gcn_task("nc", Precision::f32);
  const auto tf = train(ModelKind::transformer, Precision::f32);
  const double err = tf.outcome.summary.at("max_manifold_error").get<double>();
  const bool tpos = tf.outcome.summary.at("time_positive").get<bool>();
  Outcome o;
  o.passed = all_finite(kg) && all_finite(lp) && all_finite(nc) && all_finite(tf) && err < 1e-3 && tpos;
  o.detail = std::string("finite: kg ") + (all_finite(kg) ? "yes" : "no") + ", gcn-lp " + (all_finite(lp) ? "yes" : "no") +
             ", gcn-nc " + (all_finite(nc) ? "yes" : "no") + ", transformer " + (all_finite(tf) ? "yes" : "no") +
             "; transformer manifold error " + fmt(err) + " (limit 1e-3); 32-bit results: kg valid MRR " +
             fmt(kg.outcome.summary.at("best_valid").get<double>()) + ", LP AUC " +
             fmt(lp.outcome.summary.at("test").at("roc_auc").get<double>()) + ", NC F1 " +
             fmt(nc.outcome.summary.at("test").at("f1").get<double>()) + ", token accuracy " +
             fmt(tf.outcome.summary.at("test").at("accuracy").get<double>());
  return o;
}

Outcome criterion_determinism() {
  const auto& a = kg64();
  const auto b = train(ModelKind::kg, Precision::f64);
  std::size_t mismatch = 0;
  for (std::size_t i = 0; i < std::min(a.losses.size(), b.losses.size()); ++i) {
    if (std::memcmp(&a.losses[i], &b.losses[i], sizeof(double)) != 0) ++mismatch;
  }
  Outcome o;
  o.passed = !a.losses.empty() && a.losses.size() == b.losses.size() && mismatch == 0;
  o.detail = std::to_string(a.losses.size()) + " epochs compared, " + std::to_string(mismatch) + " differing loss values";
  return o;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::optional<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {1, "manifold closure, 1000 applications per operation",
       [] { return suite_outcome("manifold", 1000, 10.0, [](const std::string& n) { return !is_roundtrip(n); }); }},
      {2, "fx transform on-manifold, 500 (M, x), dims 2-8", [] { return suite_outcome("theorem1", 500, 0); }},
      {3, "boosts and rotations are fixed points, 200 + 200", [] { return suite_outcome("lemma1", 200, 0); }},
      {4, "pseudo-rotation triple agreement and boost exclusion", [] { return suite_outcome("lemma2", 100, 0); }},
      {5, "exp/log roundtrip to distance 5, 1000 trials",
       [] { return suite_outcome("manifold", 1000, 0, is_roundtrip); }},
      {6, "centroid optimality and weight-scale invariance", [] { return suite_outcome("centroid", 1000, 0); }},
      {7, "layer and loss gradients vs central differences", [] { return suite_outcome("gradients", 1000, 60.0); }},
      {8, "toy KG end-to-end, valid MRR >= 0.5", criterion_kg},
      {9, "toy GCN, LP AUC >= 0.9 and NC F1 >= 0.8", criterion_gcn},
      {10, "toy transformer, accuracy >= 0.9 and on-manifold", criterion_transformer},
      {11, "32-bit reruns of 8-10 stay finite", criterion_f32},
      {12, "KG loss log bitwise reproducible", criterion_determinism},
  };

  int failures = 0;
  bool ran = false;
  for (const auto& c : criteria) {
    if (only && *only != c.id) continue;
    ran = true;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.passed) ++failures;
    std::printf("criterion %2d %s: %s [%s]\n", c.id, o.passed ? "PASS" : "FAIL", c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  if (!ran) {
    std::fprintf(stderr, "no criterion %d\n", only.value_or(0));
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
