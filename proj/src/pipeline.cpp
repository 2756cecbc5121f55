#include <chrono>
#include <cmath>
#include <set>

#include <json.hpp>

#include "faultnav/agents.hpp"
#include "faultnav/errors.hpp"

namespace faultnav {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int body_line_count(const std::string& body) {
  if (body.empty()) return 0;
  int lines = 0;
  for (char c : body) {
    if (c == '\n') ++lines;
  }
  if (body.back() != '\n') ++lines;
  return lines;
}

struct DivisionOutcome {
  DivisionPlan plan;
  int effective_limit = 0;
  int overhead_tokens = 0;
};

// Groups for the prioritization phase. The per-group budget is the token
// limit scaled by the safety factor, minus the rendered prompt overhead;
// with division disabled everything lands in one group.
DivisionOutcome plan_groups(const std::vector<MethodId>& ordered,
                            const PipelineConfig& config, const PromptLibrary& prompts,
                            const std::string& failure_reason_text) {
  const TokenCounter& counter = default_token_counters().get(config.budget.counter_id);

  DivisionOutcome out;
  out.effective_limit =
      static_cast<int>(std::floor(config.budget.limit * config.budget_safety_factor));
  const PromptTemplate& tmpl = prompts.get(config.prioritize_template);
  std::map<std::string, std::string> values{{"failure_reason", failure_reason_text},
                                            {"methods", ""},
                                            {"group_index", "0"},
                                            {"group_count", "0"}};
  out.overhead_tokens = counter(render_template(tmpl, values));

  std::vector<DivisionInput> entries;
  entries.reserve(ordered.size());
  int total = 0;
  for (const auto& id : ordered) {
    const int tokens = counter("- " + id.canonical() + "\n");
    entries.push_back({id, tokens});
    total += tokens;
  }
  if (!config.enable_division) {
    out.plan.groups = {ordered};
    out.plan.per_group_tokens = {total};
    return out;
  }
  out.plan = divide(entries, out.effective_limit, out.overhead_tokens);
  return out;
}

}  // namespace

LocalizationResult localize(const FaultBundle& bundle, const PipelineConfig& config,
                            Backend& backend, Clock* clock) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  LogicalClock logical;
  Clock& clk = clock ? *clock : logical;
  PromptLibrary prompts;

  LocalizationResult result;
  result.fault_id = bundle.fault_id;
  result.config = config;
  result.context_transcript.agent = "context";
  result.context_transcript.fault_id = bundle.fault_id;
  result.debugger_transcript.agent = "debugger";
  result.debugger_transcript.fault_id = bundle.fault_id;
  result.reviewer_transcript.agent = "reviewer";
  result.reviewer_transcript.fault_id = bundle.fault_id;

  try {
    const std::map<MethodId, double>* external =
        bundle.external_scores ? &*bundle.external_scores : nullptr;
    std::vector<MethodId> ordered = rank_by(bundle.matrix, config.order, external);
    if (ordered.empty()) raise(ErrorCode::Precondition, "no covered methods to rank");

    int absent = 0;
    std::string first_absent;
    for (const auto& id : ordered) {
      if (!bundle.graph.contains(id)) {
        if (absent == 0) first_absent = id.canonical();
        ++absent;
      }
    }
    if (absent > 0) {
      result.warnings.push_back(std::to_string(absent) +
                                " covered method(s) are absent from the call graph (first: " +
                                first_absent + ")");
    }

    const TestRecord* failing = nullptr;
    for (const auto& test : bundle.matrix.tests) {
      if (test.outcome == TestOutcome::Fail) {
        failing = &test;
        break;
      }
    }
    if (!failing) raise(ErrorCode::NoFailingTest, "matrix carries no failing test");
    if (!failing->stack_trace || trim(*failing->stack_trace).empty()) {
      raise(ErrorCode::Precondition,
            "failing test " + failing->name + " has no stack trace");
    }

    StackTrace full_trace = parse_stack_trace(*failing->stack_trace);
    StackTrace pruned = prune_to_project(full_trace, bundle.project_prefixes);
    if (pruned.frames.empty()) {
      result.warnings.push_back(
          "no stack frames matched the project prefixes; keeping the full trace");
      pruned = full_trace;
    }

    MethodId test_id = MethodId::parse_test_name(failing->name);
    MethodId resolved = test_id;
    int span_start = 0;
    int span_end = 0;
    std::string body = bundle.test_body(test_id, &resolved, &span_start, &span_end);

    std::optional<int> failing_line;
    if (span_start != 0) {
      for (const auto& frame : pruned.frames) {  // innermost first
        if (frame.class_name != resolved.class_name) continue;
        if (!frame.package.empty() && frame.package != resolved.package) continue;
        if (frame.line < span_start || frame.line > span_end) continue;
        failing_line = frame.line - span_start + 1;
        break;
      }
    }
    if (!failing_line) {
      result.warnings.push_back(
          "failing line not identified inside the test body; keeping the whole test");
    }
    PreprocessedTest pre = preprocess_test(bundle.graph, resolved, body,
                                           failing_line.value_or(body_line_count(body)));
    result.warnings.insert(result.warnings.end(), pre.warnings.begin(), pre.warnings.end());

    FailureContext ctx;
    ctx.test_id = resolved;
    ctx.pruned_trace = pruned;
    ctx.pruned_test_code = pre.pruned_body;
    ctx.helper_bodies = pre.helper_bodies;

    AgentEnv env{backend, prompts, config, clk, &result.warnings};

    FailureReason reason = extract_failure_reason(env, ctx, &result.context_transcript);
    ctx.failure_reason = reason.raw;

    DivisionOutcome division = plan_groups(ordered, config, prompts, reason.raw);
    const auto& groups = division.plan.groups;

    std::vector<MethodId> merged;
    std::set<std::string> seen;
    for (size_t i = 0; i < groups.size(); ++i) {
      std::vector<MethodId> picked =
          prioritize_group(env, reason, ctx, groups[i], static_cast<int>(i) + 1,
                           static_cast<int>(groups.size()), &result.context_transcript);
      for (const auto& id : picked) {
        if (seen.insert(id.canonical()).second) merged.push_back(id);
      }
    }
    if (merged.empty()) {
      result.warnings.push_back(
          "prioritization selected no methods; falling back to the full ordered list");
      merged = ordered;
    }

    DebugResult debug =
        debug_and_rank(env, reason, ctx, merged, bundle.graph, &result.debugger_transcript);
    if (debug.ranking.entries.empty()) {
      raise(ErrorCode::UnparsableRanking, "debugger produced an empty ranking");
    }

    if (config.enable_reflexion) {
      result.final_ranking = review_and_rerank(env, debug.ranking, ctx, bundle.graph,
                                               &result.reviewer_transcript);
    } else {
      result.final_ranking = debug.ranking;
      result.final_ranking.stage = "final";
    }
  } catch (const Error& e) {
    throw Error(e.code(), bundle.fault_id + ": " + e.message());
  }

  for (const Transcript* t : {&result.context_transcript, &result.debugger_transcript,
                              &result.reviewer_transcript}) {
    result.stats.backend_calls += static_cast<int>(t->exchanges.size());
    result.stats.tool_calls += static_cast<int>(t->tool_executions.size());
    for (const auto& e : t->exchanges) {
      result.stats.prompt_tokens += e.response.usage.prompt_tokens;
      result.stats.completion_tokens += e.response.usage.completion_tokens;
    }
  }
  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::string LocalizationResult::ranking_json() const {
  json entries = json::array();
  for (const auto& e : final_ranking.entries) {
    json je{{"rank", e.ordinal_rank},
            {"method", e.method.canonical()},
            {"reasoning", e.reasoning}};
    je["fix"] = e.fix ? json(*e.fix) : json(nullptr);
    entries.push_back(std::move(je));
  }
  json j{{"fault_id", fault_id},
         {"stage", final_ranking.stage},
         {"ranking", std::move(entries)},
         {"config", json::parse(config.to_json())},
         {"stats",
          {{"backend_calls", stats.backend_calls},
           {"tool_calls", stats.tool_calls},
           {"prompt_tokens", stats.prompt_tokens},
           {"completion_tokens", stats.completion_tokens}}}};
  return j.dump(2) + "\n";
}

std::string inspect(const FaultBundle& bundle, const PipelineConfig& config) {
  config.validate();
  PromptLibrary prompts;
  const std::map<MethodId, double>* external =
      bundle.external_scores ? &*bundle.external_scores : nullptr;
  std::vector<MethodId> ordered = rank_by(bundle.matrix, config.order, external);

  json top = json::array();
  int shown = 0;
  for (const auto& score : ochiai(bundle.matrix)) {
    if (shown++ == 10) break;
    top.push_back({{"method", score.method.canonical()},
                   {"score", score.score},
                   {"e_f", score.e_f},
                   {"e_p", score.e_p},
                   {"n_f", score.n_f},
                   {"n_p", score.n_p}});
  }

  DivisionOutcome division = plan_groups(ordered, config, prompts, "");
  json groups = json::array();
  for (size_t i = 0; i < division.plan.groups.size(); ++i) {
    groups.push_back({{"methods", division.plan.groups[i].size()},
                      {"tokens", division.plan.per_group_tokens[i]}});
  }

  json j{{"fault_id", bundle.fault_id},
         {"tests",
          {{"total", bundle.matrix.tests.size()},
           {"failing", bundle.matrix.failing_count()},
           {"passing", bundle.matrix.passing_count()}}},
         {"methods", bundle.matrix.entries.size()},
         {"order", order_strategy_name(config.order)},
         {"ordered_preview", json::array()},
         {"ochiai_top", std::move(top)},
         {"division",
          {{"enabled", config.enable_division},
           {"k", division.plan.k()},
           {"token_limit", config.budget.limit},
           {"effective_limit", division.effective_limit},
           {"overhead_tokens", division.overhead_tokens},
           {"groups", std::move(groups)}}}};
  int preview = 0;
  for (const auto& id : ordered) {
    if (preview++ == 10) break;
    j["ordered_preview"].push_back(id.canonical());
  }
  return j.dump(2) + "\n";
}

}  // namespace faultnav
