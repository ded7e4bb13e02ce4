#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace hybo::verify {

// One property check: the largest error seen over all trials against a fixed
// tolerance. Structural checks report 0/1 as their error.
struct Check {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::size_t trials = 0;
  bool passed = true;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::size_t trials = 0;
  double seconds = 0.0;
  std::vector<Check> checks;
  std::vector<std::string> warnings;

  bool passed() const;
  nlohmann::json to_json() const;
};

// manifold, theorem1, lemma1, lemma2, centroid, gradients.
const std::vector<std::string>& suite_names();
bool is_suite(const std::string& name);

// Runs one named suite (64-bit). `trials` sets the number of random instances
// per check; the gradient suite caps it at 3 instances per layer. Zero trials
// passes vacuously with a warning. Throws std::invalid_argument for an
// unknown suite.
SuiteReport run_suite(const std::string& name, std::uint64_t seed, std::size_t trials);

// "all" expands to every suite in order.
std::vector<SuiteReport> run_suites(const std::string& name, std::uint64_t seed, std::size_t trials);

}  // namespace hybo::verify
