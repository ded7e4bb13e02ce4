#include "hybo/hybo.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "hybo/app/run.hpp"
#include "hybo/lorentz/manifold.hpp"
#include "hybo/verify/suites.hpp"

struct hybo_config {
  hybo::app::RunConfig value;
};

struct hybo_run {
  nlohmann::json summary;
  hybo::nn::Checkpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;

hybo_status fail(hybo_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Maps the library's exception types onto status codes.
template <typename F>
hybo_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const hybo::train::NumericalError& e) {
    return fail(HYBO_NUMERICAL, e.what());
  } catch (const hybo::lorentz::GeometryError& e) {
    return fail(HYBO_DOMAIN, e.what());
  } catch (const hybo::ad::DomainError& e) {
    return fail(HYBO_DOMAIN, e.what());
  } catch (const hybo::data::DataError& e) {
    return fail(HYBO_IO, e.what());
  } catch (const hybo::nn::CheckpointError& e) {
    return fail(HYBO_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(HYBO_IO, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(HYBO_INVALID_ARGUMENT, std::string("JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    return fail(HYBO_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(HYBO_INVALID_ARGUMENT, e.what());
  } catch (const std::domain_error& e) {
    return fail(HYBO_DOMAIN, e.what());
  } catch (const std::bad_alloc&) {
    return fail(HYBO_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HYBO_INTERNAL, e.what());
  } catch (...) {
    return fail(HYBO_INTERNAL, "unknown error");
  }
}

bool missing(const void* p, const char* name) {
  if (p != nullptr) return false;
  g_last_error = std::string(name) + " must not be NULL";
  return true;
}

}  // namespace

extern "C" {

const char* hybo_version(void) { return "0.1.0"; }

const char* hybo_last_error(void) { return g_last_error.c_str(); }

void hybo_string_free(char* s) { std::free(s); }

hybo_status hybo_verify(const char* suite, uint64_t seed, size_t trials, char** report_json) {
  if (missing(suite, "suite") || missing(report_json, "report_json")) return HYBO_INVALID_ARGUMENT;
  return guarded([&] {
    const auto reports = hybo::verify::run_suites(suite, seed, trials);
    nlohmann::json j{{"seed", seed}, {"trials", trials}, {"suites", nlohmann::json::array()}};
    bool passed = true;
    std::string failing;
    for (const auto& r : reports) {
      j["suites"].push_back(r.to_json());
      for (const auto& c : r.checks) {
        if (!c.passed) {
          passed = false;
          failing += (failing.empty() ? "" : ", ") + r.suite + "/" + c.name;
        }
      }
    }
    j["passed"] = passed;
    *report_json = copy_string(j.dump());
    return passed ? HYBO_OK : fail(HYBO_CHECK_FAILED, "failing checks: " + failing);
  });
}

hybo_status hybo_generate(const char* kind, const char* options_json, uint64_t seed, const char* out_dir,
                          char** manifest_json) {
  if (missing(kind, "kind") || missing(out_dir, "out_dir") || missing(manifest_json, "manifest_json")) {
    return HYBO_INVALID_ARGUMENT;
  }
  return guarded([&] {
    hybo::app::GeneratorSpec spec;
    if (std::string(kind) == "tree-graph") {
      spec.branching = 2;
      spec.depth = 5;
    }
    if (options_json != nullptr) {
      const auto o = nlohmann::json::parse(options_json);
      if (!o.is_object()) throw std::invalid_argument("generator options must be a JSON object");
      for (auto it = o.begin(); it != o.end(); ++it) {
        const auto v = it.value().get<std::size_t>();
        if (it.key() == "branching") {
          spec.branching = v;
        } else if (it.key() == "depth") {
          spec.depth = v;
        } else if (it.key() == "size") {
          spec.size = v;
        } else {
          throw std::invalid_argument("unknown generator option '" + it.key() + "'");
        }
      }
    }
    *manifest_json = copy_string(hybo::app::generate_dataset(kind, spec, seed, out_dir).dump());
    return HYBO_OK;
  });
}

hybo_status hybo_config_parse(const char* json_text, hybo_config** out) {
  if (missing(json_text, "json_text") || missing(out, "out")) return HYBO_INVALID_ARGUMENT;
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw hybo::app::ConfigError(std::string("configuration is not valid JSON: ") + e.what());
    }
    *out = new hybo_config{hybo::app::parse_run_config(doc)};
    return HYBO_OK;
  });
}

hybo_status hybo_config_default(const char* model, hybo_config** out) {
  if (missing(model, "model") || missing(out, "out")) return HYBO_INVALID_ARGUMENT;
  return guarded([&] {
    *out = new hybo_config{hybo::app::default_config(hybo::app::parse_model(model))};
    return HYBO_OK;
  });
}

hybo_status hybo_config_set(hybo_config* config, const char* key, const char* value_json) {
  if (missing(config, "config") || missing(key, "key") || missing(value_json, "value_json")) return HYBO_INVALID_ARGUMENT;
  return guarded([&] {
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(value_json);
    } catch (const nlohmann::json::parse_error&) {
      // Bare words such as adam or f32 are taken as strings.
      value = std::string(value_json);
    }
    hybo::app::apply_override(config->value, key, value);
    return HYBO_OK;
  });
}

hybo_status hybo_config_to_json(const hybo_config* config, char** json_text) {
  if (missing(config, "config") || missing(json_text, "json_text")) return HYBO_INVALID_ARGUMENT;
  return guarded([&] {
    *json_text = copy_string(hybo::app::to_json(config->value).dump(2));
    return HYBO_OK;
  });
}

void hybo_config_free(hybo_config* config) { delete config; }

hybo_status hybo_train(const hybo_config* config, hybo_log_fn log, void* user, hybo_run** out) {
  if (missing(config, "config") || missing(out, "out")) return HYBO_INVALID_ARGUMENT;
  *out = nullptr;
  return guarded([&] {
    hybo::train::LogSink sink;
    if (log != nullptr) {
      sink = [log, user](const hybo::train::EpochRecord& r) { log(hybo::train::to_jsonl(r).c_str(), user); };
    }
    auto outcome = hybo::app::run_training(config->value, sink);
    *out = new hybo_run{std::move(outcome.summary), std::move(outcome.checkpoint)};
    if (outcome.aborted) return fail(HYBO_NUMERICAL, "training aborted: " + (*out)->summary["aborted"].get<std::string>());
    return HYBO_OK;
  });
}

hybo_status hybo_run_summary(const hybo_run* run, char** summary_json) {
  if (missing(run, "run") || missing(summary_json, "summary_json")) return HYBO_INVALID_ARGUMENT;
  return guarded([&] {
    *summary_json = copy_string(run->summary.dump());
    return HYBO_OK;
  });
}

hybo_status hybo_run_save(const hybo_run* run, const char* checkpoint_path) {
  if (missing(run, "run") || missing(checkpoint_path, "checkpoint_path")) return HYBO_INVALID_ARGUMENT;
  return guarded([&] {
    hybo::nn::write_checkpoint(checkpoint_path, run->checkpoint);
    return HYBO_OK;
  });
}

void hybo_run_free(hybo_run* run) { delete run; }

hybo_status hybo_evaluate(const char* checkpoint_path, const char* data_path, const char* split, char** metrics_json) {
  if (missing(checkpoint_path, "checkpoint_path") || missing(metrics_json, "metrics_json")) return HYBO_INVALID_ARGUMENT;
  return guarded([&] {
    const auto ckpt = hybo::nn::read_checkpoint(checkpoint_path);
    std::optional<std::string> data;
    if (data_path != nullptr) data = data_path;
    *metrics_json = copy_string(hybo::app::evaluate_checkpoint(ckpt, data, split ? split : "test").dump());
    return HYBO_OK;
  });
}

}  // extern "C"
