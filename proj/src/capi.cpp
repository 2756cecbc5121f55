#include "faultnav.h"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "faultnav/agents.hpp"
#include "faultnav/bundle.hpp"
#include "faultnav/errors.hpp"
#include "faultnav/evalbench.hpp"
#include "faultnav/remote_backend.hpp"
#include "faultnav/spectra.hpp"

namespace {

using faultnav::Error;
using faultnav::ErrorCode;

thread_local std::string g_last_error;

fn_status status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
      return FN_ERR_IO;
    case ErrorCode::MalformedLine:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::MalformedGraph:
    case ErrorCode::DanglingEdge:
    case ErrorCode::DuplicateMethod:
    case ErrorCode::UnparsableTrace:
    case ErrorCode::MalformedBundle:
      return FN_ERR_PARSE;
    case ErrorCode::InvalidConfig:
    case ErrorCode::UnknownCounter:
    case ErrorCode::Precondition:
      return FN_ERR_INVALID_ARG;
    case ErrorCode::TransportError:
    case ErrorCode::BackendRefusal:
    case ErrorCode::ContextOverflow:
    case ErrorCode::MockScriptError:
      return FN_ERR_BACKEND;
    case ErrorCode::NoFailingTest:
    case ErrorCode::EmptyExternalScores:
    case ErrorCode::FailingLineOutOfRange:
    case ErrorCode::EntryExceedsBudget:
    case ErrorCode::ToolLoopExhausted:
    case ErrorCode::UnparsableRanking:
    case ErrorCode::MissingSection:
    case ErrorCode::UnparsableReply:
      return FN_ERR_PIPELINE;
    case ErrorCode::MethodNotFound:
      return FN_ERR_NOT_FOUND;
  }
  return FN_ERR_INTERNAL;
}

fn_status fail(fn_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body`, converting exceptions into a status plus last-error text.
template <typename Fn>
fn_status guarded(Fn&& body) {
  try {
    body();
    g_last_error.clear();
    return FN_OK;
  } catch (const Error& e) {
    return fail(status_for(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail(FN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FN_ERR_INTERNAL, "unknown failure");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// ------------------------------------------------------------- configuration

enum class ValueKind { Bool, PosInt, NonNegInt, UnitFloat, Order, BackendKind, Text };

const std::map<std::string, ValueKind>& known_keys() {
  static const std::map<std::string, ValueKind> keys = {
      {"backend", ValueKind::BackendKind},
      {"mock_script", ValueKind::Text},
      {"order", ValueKind::Order},
      {"external_scores", ValueKind::Text},
      {"token_limit", ValueKind::PosInt},
      {"token_counter", ValueKind::Text},
      {"budget_safety_factor", ValueKind::UnitFloat},
      {"navigation", ValueKind::Bool},
      {"division", ValueKind::Bool},
      {"reflexion", ValueKind::Bool},
      {"reflexion_iters", ValueKind::PosInt},
      {"max_tool_calls", ValueKind::NonNegInt},
      {"max_tokens", ValueKind::NonNegInt},
      {"model", ValueKind::Text},
      {"api_key", ValueKind::Text},
      {"api_base_url", ValueKind::Text},
      {"max_inflight", ValueKind::PosInt},
      {"retries", ValueKind::PosInt},
  };
  return keys;
}

bool parse_bool(const std::string& value, bool* out) {
  if (value == "true" || value == "1") {
    *out = true;
    return true;
  }
  if (value == "false" || value == "0") {
    *out = false;
    return true;
  }
  return false;
}

bool parse_int(const std::string& value, long* out) {
  if (value.empty()) return false;
  errno = 0;
  char* end = nullptr;
  long parsed = std::strtol(value.c_str(), &end, 10);
  if (errno != 0 || end == nullptr || *end != '\0') return false;
  *out = parsed;
  return true;
}

bool parse_double(const std::string& value, double* out) {
  if (value.empty()) return false;
  errno = 0;
  char* end = nullptr;
  double parsed = std::strtod(value.c_str(), &end);
  if (errno != 0 || end == nullptr || *end != '\0') return false;
  *out = parsed;
  return true;
}

// Validates one assignment; returns an error message or empty on success.
std::string check_value(const std::string& key, const std::string& value) {
  auto it = known_keys().find(key);
  if (it == known_keys().end()) return "unknown configuration key: " + key;
  bool b = false;
  long n = 0;
  double d = 0;
  switch (it->second) {
    case ValueKind::Bool:
      if (!parse_bool(value, &b)) return key + " expects true/false/1/0, got: " + value;
      return "";
    case ValueKind::PosInt:
      if (!parse_int(value, &n) || n <= 0) return key + " expects a positive integer, got: " + value;
      return "";
    case ValueKind::NonNegInt:
      if (!parse_int(value, &n) || n < 0)
        return key + " expects a non-negative integer, got: " + value;
      return "";
    case ValueKind::UnitFloat:
      if (!parse_double(value, &d) || d <= 0 || d > 1)
        return key + " expects a number in (0, 1], got: " + value;
      return "";
    case ValueKind::Order:
      if (value != "execution" && value != "ochiai" && value != "external")
        return "order expects execution, ochiai or external, got: " + value;
      return "";
    case ValueKind::BackendKind:
      if (value != "mock" && value != "remote") return "backend expects mock or remote, got: " + value;
      return "";
    case ValueKind::Text:
      return "";
  }
  return "unknown configuration key: " + key;
}

std::string trimmed(const std::string& s) {
  size_t begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  size_t end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

struct fn_bundle {
  faultnav::FaultBundle bundle;
};

struct fn_config {
  std::map<std::string, std::string> values;

  std::string get(const std::string& key, const std::string& fallback = "") const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }
  bool has(const std::string& key) const { return values.count(key) != 0; }
};

struct fn_result {
  std::string ranking_json;
  std::vector<std::pair<std::string, std::string>> transcripts;  // agent, json
  std::vector<std::string> warnings;
};

namespace {

const fn_config& effective_config(const fn_config* config) {
  static const fn_config empty;
  return config == nullptr ? empty : *config;
}

faultnav::PipelineConfig make_pipeline_config(const fn_config& c) {
  faultnav::PipelineConfig out;
  if (c.has("order")) out.order = faultnav::order_strategy_from_name(c.get("order"));
  if (c.has("navigation")) parse_bool(c.get("navigation"), &out.enable_navigation);
  if (c.has("division")) parse_bool(c.get("division"), &out.enable_division);
  if (c.has("reflexion")) parse_bool(c.get("reflexion"), &out.enable_reflexion);
  long n = 0;
  if (c.has("reflexion_iters") && parse_int(c.get("reflexion_iters"), &n))
    out.reflexion_max_iters = static_cast<int>(n);
  if (c.has("max_tool_calls") && parse_int(c.get("max_tool_calls"), &n))
    out.max_tool_calls = static_cast<int>(n);
  if (c.has("max_tokens") && parse_int(c.get("max_tokens"), &n)) out.max_tokens = static_cast<int>(n);
  if (c.has("token_limit") && parse_int(c.get("token_limit"), &n))
    out.budget.limit = static_cast<int>(n);
  if (c.has("token_counter")) out.budget.counter_id = c.get("token_counter");
  double d = 0;
  if (c.has("budget_safety_factor") && parse_double(c.get("budget_safety_factor"), &d))
    out.budget_safety_factor = d;
  if (c.has("model")) out.model = c.get("model");
  out.validate();
  return out;
}

// The bundle with any file-based overrides from the configuration applied.
faultnav::FaultBundle effective_bundle(const faultnav::FaultBundle& bundle, const fn_config& c) {
  faultnav::FaultBundle out = bundle;
  if (c.has("external_scores")) {
    const std::string text = faultnav::read_file(c.get("external_scores"));
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
      throw Error(ErrorCode::InvalidConfig,
                  "external_scores file must hold a JSON object of method id to score");
    std::map<faultnav::MethodId, double> scores;
    for (const auto& [key, value] : doc.items()) {
      if (!value.is_number())
        throw Error(ErrorCode::InvalidConfig, "external score for " + key + " is not a number");
      scores.emplace(faultnav::MethodId::parse(key), value.get<double>());
    }
    out.external_scores = std::move(scores);
  }
  if (c.has("mock_script"))
    out.mock_script = faultnav::MockScript::load(faultnav::read_file(c.get("mock_script")));
  return out;
}

std::unique_ptr<faultnav::Backend> make_backend(const faultnav::FaultBundle& bundle,
                                                const fn_config& c) {
  const std::string kind = c.get("backend", "mock");
  if (kind == "mock") {
    if (!bundle.mock_script.has_value())
      throw Error(ErrorCode::InvalidConfig,
                  "mock backend needs a script: set mock_script or add one to the bundle");
    return std::make_unique<faultnav::MockBackend>(*bundle.mock_script);
  }
  faultnav::RemoteConfig remote = faultnav::RemoteConfig::from_env();
  if (c.has("api_key")) remote.api_key = c.get("api_key");
  if (c.has("api_base_url")) remote.api_base_url = c.get("api_base_url");
  if (c.has("model")) remote.model = c.get("model");
  long n = 0;
  if (c.has("max_inflight") && parse_int(c.get("max_inflight"), &n))
    remote.max_inflight = static_cast<int>(n);
  if (c.has("retries") && parse_int(c.get("retries"), &n)) remote.retries = static_cast<int>(n);
  return std::make_unique<faultnav::RemoteBackend>(std::move(remote));
}

}  // namespace

extern "C" {

const char* fn_version(void) { return "0.1.0"; }

const char* fn_last_error(void) { return g_last_error.c_str(); }

void fn_string_free(char* s) { std::free(s); }

fn_status fn_bundle_open(const char* bundle_dir, fn_bundle** out) {
  if (bundle_dir == nullptr || out == nullptr)
    return fail(FN_ERR_INVALID_ARG, "fn_bundle_open: NULL argument");
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<fn_bundle>();
    handle->bundle = faultnav::FaultBundle::load(bundle_dir);
    *out = handle.release();
  });
}

const char* fn_bundle_fault_id(const fn_bundle* bundle) {
  return bundle == nullptr ? "" : bundle->bundle.fault_id.c_str();
}

void fn_bundle_free(fn_bundle* bundle) { delete bundle; }

fn_status fn_config_new(fn_config** out) {
  if (out == nullptr) return fail(FN_ERR_INVALID_ARG, "fn_config_new: NULL argument");
  *out = new fn_config();
  g_last_error.clear();
  return FN_OK;
}

fn_status fn_config_set(fn_config* config, const char* key, const char* value) {
  if (config == nullptr || key == nullptr || value == nullptr)
    return fail(FN_ERR_INVALID_ARG, "fn_config_set: NULL argument");
  const std::string problem = check_value(key, value);
  if (!problem.empty()) return fail(FN_ERR_INVALID_ARG, problem);
  config->values[key] = value;
  g_last_error.clear();
  return FN_OK;
}

fn_status fn_config_load_file(fn_config* config, const char* path) {
  if (config == nullptr || path == nullptr)
    return fail(FN_ERR_INVALID_ARG, "fn_config_load_file: NULL argument");
  return guarded([&] {
    const std::string text = faultnav::read_file(path);
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string entry = trimmed(line);
      if (entry.empty()) continue;
      const size_t eq = entry.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorCode::InvalidConfig, std::string(path) + ":" + std::to_string(line_no) +
                                                  ": expected key = value");
      const std::string key = trimmed(entry.substr(0, eq));
      const std::string value = trimmed(entry.substr(eq + 1));
      const std::string problem = check_value(key, value);
      if (!problem.empty())
        throw Error(ErrorCode::InvalidConfig,
                    std::string(path) + ":" + std::to_string(line_no) + ": " + problem);
      config->values[key] = value;
    }
  });
}

void fn_config_free(fn_config* config) { delete config; }

fn_status fn_localize(const fn_bundle* bundle, const fn_config* config, fn_result** out) {
  if (bundle == nullptr || out == nullptr)
    return fail(FN_ERR_INVALID_ARG, "fn_localize: NULL argument");
  *out = nullptr;
  return guarded([&] {
    const fn_config& c = effective_config(config);
    const faultnav::PipelineConfig pipeline_config = make_pipeline_config(c);
    const faultnav::FaultBundle effective = effective_bundle(bundle->bundle, c);
    std::unique_ptr<faultnav::Backend> backend = make_backend(effective, c);
    // Scripted runs keep logical timestamps so reruns serialize identically;
    // remote runs record wall time.
    std::unique_ptr<faultnav::Clock> clock;
    if (c.get("backend", "mock") == "remote") clock = std::make_unique<faultnav::WallClock>();
    faultnav::LocalizationResult run =
        faultnav::localize(effective, pipeline_config, *backend, clock.get());
    auto result = std::make_unique<fn_result>();
    result->ranking_json = run.ranking_json();
    result->transcripts.emplace_back(run.context_transcript.agent, run.context_transcript.to_json());
    result->transcripts.emplace_back(run.debugger_transcript.agent,
                                     run.debugger_transcript.to_json());
    result->transcripts.emplace_back(run.reviewer_transcript.agent,
                                     run.reviewer_transcript.to_json());
    result->warnings = run.warnings;
    *out = result.release();
  });
}

const char* fn_result_ranking_json(const fn_result* result) {
  return result == nullptr ? "" : result->ranking_json.c_str();
}

size_t fn_result_transcript_count(const fn_result* result) {
  return result == nullptr ? 0 : result->transcripts.size();
}

const char* fn_result_transcript_agent(const fn_result* result, size_t index) {
  if (result == nullptr || index >= result->transcripts.size()) return "";
  return result->transcripts[index].first.c_str();
}

const char* fn_result_transcript_json(const fn_result* result, size_t index) {
  if (result == nullptr || index >= result->transcripts.size()) return "";
  return result->transcripts[index].second.c_str();
}

size_t fn_result_warning_count(const fn_result* result) {
  return result == nullptr ? 0 : result->warnings.size();
}

const char* fn_result_warning(const fn_result* result, size_t index) {
  if (result == nullptr || index >= result->warnings.size()) return "";
  return result->warnings[index].c_str();
}

void fn_result_free(fn_result* result) { delete result; }

fn_status fn_inspect(const fn_bundle* bundle, const fn_config* config, char** json_out) {
  if (bundle == nullptr || json_out == nullptr)
    return fail(FN_ERR_INVALID_ARG, "fn_inspect: NULL argument");
  *json_out = nullptr;
  return guarded([&] {
    const fn_config& c = effective_config(config);
    const faultnav::PipelineConfig pipeline_config = make_pipeline_config(c);
    const faultnav::FaultBundle effective = effective_bundle(bundle->bundle, c);
    *json_out = copy_string(faultnav::inspect(effective, pipeline_config));
    if (*json_out == nullptr) throw std::bad_alloc();
  });
}

fn_status fn_evaluate(const char* rankings_dir, const char* truth_file, char** json_out,
                      char** table_out) {
  if (rankings_dir == nullptr || truth_file == nullptr)
    return fail(FN_ERR_INVALID_ARG, "fn_evaluate: NULL argument");
  if (json_out != nullptr) *json_out = nullptr;
  if (table_out != nullptr) *table_out = nullptr;
  return guarded([&] {
    const faultnav::TopNReport report = faultnav::evaluate_rankings(rankings_dir, truth_file);
    if (json_out != nullptr) {
      *json_out = copy_string(faultnav::report_to_json(report));
      if (*json_out == nullptr) throw std::bad_alloc();
    }
    if (table_out != nullptr) {
      *table_out = copy_string(faultnav::report_to_text(report));
      if (*table_out == nullptr) {
        if (json_out != nullptr) {
          std::free(*json_out);
          *json_out = nullptr;
        }
        throw std::bad_alloc();
      }
    }
  });
}

}  // extern "C"
