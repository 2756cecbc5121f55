// Command-line frontend. Links only the public C interface so it doubles as
// a workout for the shared library boundary.
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "faultnav.h"

namespace fs = std::filesystem;

namespace {

// Input problems exit 3, pipeline and backend problems exit 2.
int exit_code_for(fn_status status) {
  switch (status) {
    case FN_OK:
      return 0;
    case FN_ERR_IO:
    case FN_ERR_PARSE:
    case FN_ERR_INVALID_ARG:
    case FN_ERR_NOT_FOUND:
      return 3;
    case FN_ERR_BACKEND:
    case FN_ERR_PIPELINE:
    case FN_ERR_INTERNAL:
      return 2;
  }
  return 2;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct BundleHandle {
  fn_bundle* ptr = nullptr;
  ~BundleHandle() { fn_bundle_free(ptr); }
};

struct ConfigHandle {
  fn_config* ptr = nullptr;
  ~ConfigHandle() { fn_config_free(ptr); }
};

struct ResultHandle {
  fn_result* ptr = nullptr;
  ~ResultHandle() { fn_result_free(ptr); }
};

struct StringHandle {
  char* ptr = nullptr;
  ~StringHandle() { fn_string_free(ptr); }
};

// Pipeline flags shared by localize and inspect; each maps onto one
// configuration key and is applied only when the user passed it.
struct PipelineFlags {
  std::string order;
  std::string external_scores;
  int token_limit = 0;
  std::string token_counter;
  double budget_safety_factor = 0;
  int reflexion_iters = 0;
  int max_tool_calls = 0;
  int max_tokens = 0;
  std::string model;
  bool no_navigation = false;
  bool no_division = false;
  bool no_reflexion = false;
  std::string config_file;

  CLI::Option* order_opt = nullptr;
  CLI::Option* scores_opt = nullptr;
  CLI::Option* limit_opt = nullptr;
  CLI::Option* counter_opt = nullptr;
  CLI::Option* safety_opt = nullptr;
  CLI::Option* iters_opt = nullptr;
  CLI::Option* tool_calls_opt = nullptr;
  CLI::Option* max_tokens_opt = nullptr;
  CLI::Option* model_opt = nullptr;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags* flags) {
  cmd->add_option("--config", flags->config_file,
                  "key = value configuration file; flags override it");
  flags->order_opt = cmd->add_option("--order", flags->order, "method ordering strategy")
                         ->check(CLI::IsMember({"execution", "ochiai", "external"}));
  flags->scores_opt = cmd->add_option("--external-scores", flags->external_scores,
                                      "JSON file of method id to score, for --order external");
  flags->limit_opt =
      cmd->add_option("--token-limit", flags->token_limit, "context window budget in tokens");
  flags->counter_opt =
      cmd->add_option("--token-counter", flags->token_counter, "registered token counter name");
  flags->safety_opt = cmd->add_option("--budget-safety-factor", flags->budget_safety_factor,
                                      "fraction of the token limit to actually use");
  flags->iters_opt =
      cmd->add_option("--reflexion-iters", flags->reflexion_iters, "review iteration cap");
  flags->tool_calls_opt =
      cmd->add_option("--max-tool-calls", flags->max_tool_calls, "navigation tool call cap");
  flags->max_tokens_opt = cmd->add_option("--max-tokens", flags->max_tokens,
                                          "completion token cap (0 = backend default)");
  flags->model_opt = cmd->add_option("--model", flags->model, "model name");
  cmd->add_flag("--no-navigation", flags->no_navigation, "disable call-graph navigation tools");
  cmd->add_flag("--no-division", flags->no_division, "send all covered methods as one group");
  cmd->add_flag("--no-reflexion", flags->no_reflexion, "skip the review agent");
}

// Builds the configuration: defaults, then the config file, then flags.
int build_config(const PipelineFlags& flags, ConfigHandle* out) {
  if (fn_config_new(&out->ptr) != FN_OK) {
    std::cerr << "error: " << fn_last_error() << "\n";
    return 2;
  }
  fn_status status = FN_OK;
  auto set = [&](const char* key, const std::string& value) {
    if (status == FN_OK) status = fn_config_set(out->ptr, key, value.c_str());
  };
  if (!flags.config_file.empty()) {
    status = fn_config_load_file(out->ptr, flags.config_file.c_str());
    if (status != FN_OK) {
      std::cerr << "error: " << fn_last_error() << "\n";
      return exit_code_for(status);
    }
  }
  if (flags.order_opt->count() > 0) set("order", flags.order);
  if (flags.scores_opt->count() > 0) set("external_scores", flags.external_scores);
  if (flags.limit_opt->count() > 0) set("token_limit", std::to_string(flags.token_limit));
  if (flags.counter_opt->count() > 0) set("token_counter", flags.token_counter);
  if (flags.safety_opt->count() > 0)
    set("budget_safety_factor", std::to_string(flags.budget_safety_factor));
  if (flags.iters_opt->count() > 0) set("reflexion_iters", std::to_string(flags.reflexion_iters));
  if (flags.tool_calls_opt->count() > 0) set("max_tool_calls", std::to_string(flags.max_tool_calls));
  if (flags.max_tokens_opt->count() > 0) set("max_tokens", std::to_string(flags.max_tokens));
  if (flags.model_opt->count() > 0) set("model", flags.model);
  if (flags.no_navigation) set("navigation", "false");
  if (flags.no_division) set("division", "false");
  if (flags.no_reflexion) set("reflexion", "false");
  if (status != FN_OK) {
    std::cerr << "error: " << fn_last_error() << "\n";
    return exit_code_for(status);
  }
  return 0;
}

struct RunOutcome {
  std::string bundle_dir;
  std::string fault_id;
  int exit_code = 0;
  std::string message;  // error text or the ranking path
};

RunOutcome localize_one(const std::string& bundle_dir, const fn_config* config,
                        const fs::path& out_root, bool nest_under_fault_id) {
  RunOutcome outcome;
  outcome.bundle_dir = bundle_dir;
  BundleHandle bundle;
  fn_status status = fn_bundle_open(bundle_dir.c_str(), &bundle.ptr);
  if (status != FN_OK) {
    outcome.exit_code = exit_code_for(status);
    outcome.message = fn_last_error();
    return outcome;
  }
  outcome.fault_id = fn_bundle_fault_id(bundle.ptr);
  ResultHandle result;
  status = fn_localize(bundle.ptr, config, &result.ptr);
  if (status != FN_OK) {
    outcome.exit_code = exit_code_for(status);
    outcome.message = fn_last_error();
    return outcome;
  }
  try {
    const fs::path dir = nest_under_fault_id ? out_root / outcome.fault_id : out_root;
    const fs::path ranking_path = dir / "ranking.json";
    write_atomic(ranking_path, fn_result_ranking_json(result.ptr));
    for (size_t i = 0; i < fn_result_transcript_count(result.ptr); ++i) {
      const std::string agent = fn_result_transcript_agent(result.ptr, i);
      write_atomic(dir / "transcripts" / (agent + ".json"),
                   fn_result_transcript_json(result.ptr, i));
    }
    for (size_t i = 0; i < fn_result_warning_count(result.ptr); ++i)
      std::cerr << outcome.fault_id << ": warning: " << fn_result_warning(result.ptr, i) << "\n";
    outcome.message = ranking_path.string();
  } catch (const std::exception& e) {
    outcome.exit_code = 3;
    outcome.message = e.what();
  }
  return outcome;
}

int run_localize(const std::vector<std::string>& bundles, const fn_config* config,
                 const std::string& out_dir, int jobs) {
  const bool nest = bundles.size() > 1;
  std::vector<RunOutcome> outcomes(bundles.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < bundles.size(); i = next.fetch_add(1))
      outcomes[i] = localize_one(bundles[i], config, out_dir, nest);
  };
  const int thread_count = std::max(1, std::min<int>(jobs, static_cast<int>(bundles.size())));
  if (thread_count == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(thread_count));
    for (int i = 0; i < thread_count; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  int worst = 0;
  for (const RunOutcome& outcome : outcomes) {
    if (outcome.exit_code == 0) {
      std::cout << (outcome.fault_id.empty() ? outcome.bundle_dir : outcome.fault_id) << ": "
                << outcome.message << "\n";
      continue;
    }
    std::cerr << "error: " << outcome.bundle_dir << ": " << outcome.message << "\n";
    // A pipeline failure (2) outranks an input failure (3) when runs mix.
    if (worst == 0 || outcome.exit_code < worst) worst = outcome.exit_code;
  }
  return worst;
}

int run_inspect(const std::string& bundle_dir, const PipelineFlags& flags) {
  ConfigHandle config;
  if (int rc = build_config(flags, &config); rc != 0) return rc;
  BundleHandle bundle;
  fn_status status = fn_bundle_open(bundle_dir.c_str(), &bundle.ptr);
  if (status != FN_OK) {
    std::cerr << "error: " << bundle_dir << ": " << fn_last_error() << "\n";
    return exit_code_for(status);
  }
  StringHandle json;
  status = fn_inspect(bundle.ptr, config.ptr, &json.ptr);
  if (status != FN_OK) {
    std::cerr << "error: " << bundle_dir << ": " << fn_last_error() << "\n";
    return exit_code_for(status);
  }
  std::cout << json.ptr;
  return 0;
}

int run_evaluate(const std::string& rankings_dir, const std::string& truth_file,
                 const std::string& format, const std::string& report_path) {
  StringHandle json;
  StringHandle table;
  fn_status status = fn_evaluate(rankings_dir.c_str(), truth_file.c_str(), &json.ptr, &table.ptr);
  if (status != FN_OK) {
    std::cerr << "error: " << fn_last_error() << "\n";
    return exit_code_for(status);
  }
  try {
    const fs::path report =
        report_path.empty() ? fs::path(rankings_dir) / "report.json" : fs::path(report_path);
    write_atomic(report, json.ptr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  std::cout << (format == "json" ? json.ptr : table.ptr);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("fault localization pipeline (") + fn_version() + ")", "faultnav"};
  app.require_subcommand(1);

  CLI::App* localize = app.add_subcommand("localize", "run the agent pipeline over fault bundles");
  std::vector<std::string> bundles;
  std::string out_dir = "out";
  std::string backend = "mock";
  std::string mock_script;
  int jobs = 1;
  PipelineFlags localize_flags;
  localize->add_option("--bundle", bundles, "fault bundle directory (repeatable)")->required();
  localize->add_option("--out", out_dir, "output directory")->capture_default_str();
  CLI::Option* backend_opt = localize->add_option("--backend", backend, "model backend")
                                 ->check(CLI::IsMember({"mock", "remote"}))
                                 ->capture_default_str();
  CLI::Option* script_opt = localize->add_option(
      "--mock-script", mock_script, "scripted replies file; overrides the bundle's script");
  localize->add_option("--jobs", jobs, "bundles processed in parallel")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_pipeline_flags(localize, &localize_flags);

  CLI::App* inspect = app.add_subcommand("inspect", "summarize a bundle without any backend");
  std::string inspect_bundle;
  PipelineFlags inspect_flags;
  inspect->add_option("--bundle", inspect_bundle, "fault bundle directory")->required();
  add_pipeline_flags(inspect, &inspect_flags);

  CLI::App* evaluate = app.add_subcommand("evaluate", "score ranking files against ground truth");
  std::string rankings_dir;
  std::string truth_file;
  std::string format = "text";
  std::string report_path;
  evaluate->add_option("--rankings", rankings_dir, "directory of ranking files")->required();
  evaluate->add_option("--truth", truth_file, "ground truth JSON file")->required();
  evaluate->add_option("--format", format, "stdout format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();
  evaluate->add_option("--report", report_path,
                       "JSON report path (default: <rankings>/report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    // Usage problems exit 2, matching unknown-flag behavior.
    std::cerr << e.what() << "\nRun with --help for usage.\n";
    return 2;
  }

  if (localize->parsed()) {
    ConfigHandle config;
    if (int rc = build_config(localize_flags, &config); rc != 0) return rc;
    fn_status status = FN_OK;
    if (backend_opt->count() > 0) status = fn_config_set(config.ptr, "backend", backend.c_str());
    if (status == FN_OK && script_opt->count() > 0)
      status = fn_config_set(config.ptr, "mock_script", mock_script.c_str());
    if (status != FN_OK) {
      std::cerr << "error: " << fn_last_error() << "\n";
      return exit_code_for(status);
    }
    return run_localize(bundles, config.ptr, out_dir, jobs);
  }
  if (inspect->parsed()) return run_inspect(inspect_bundle, inspect_flags);
  if (evaluate->parsed()) return run_evaluate(rankings_dir, truth_file, format, report_path);
  return 2;
}
