#pragma once

#include <optional>
#include <string>
#include <vector>

#include "faultnav/bundle.hpp"
#include "faultnav/codegraph.hpp"
#include "faultnav/division.hpp"
#include "faultnav/llm.hpp"
#include "faultnav/preprocess.hpp"
#include "faultnav/prompts.hpp"
#include "faultnav/spectra.hpp"

namespace faultnav {

// ---------------------------------------------------------------- data types

// Preprocessed evidence for one failing test, the input every agent sees.
struct FailureContext {
  MethodId test_id;
  StackTrace pruned_trace;
  std::string pruned_test_code;
  std::vector<std::string> helper_bodies;
  std::string failure_reason;  // raw reply text, filled by the context agent

  // Test code plus helper bodies, as rendered into prompts.
  std::string test_code_block() const;
};

struct FailureReason {
  std::string test_purpose;
  std::string expected_output;
  std::string failure_reason;
  std::string raw;
};

struct ReasonedMethod {
  enum class Via { Prioritized, Navigation };
  MethodId method;
  std::string reasoning;
  Via visited_via = Via::Prioritized;
};

struct RankedEntry {
  MethodId method;
  int ordinal_rank = 0;  // 1-based, strictly increasing
  std::string reasoning;
  std::optional<std::string> fix;

  bool operator==(const RankedEntry&) const = default;
};

struct RankedList {
  std::vector<RankedEntry> entries;
  std::string stage;  // "debugger" | "reviewer_iter_<n>" | "final"

  std::vector<std::string> method_order() const;  // canonical ids in rank order
  bool operator==(const RankedList&) const = default;
};

struct TokenBudget {
  int limit = 128000;
  std::string counter_id = "heuristic";
};

struct PipelineConfig {
  bool enable_navigation = true;
  bool enable_division = true;
  bool enable_reflexion = true;
  OrderStrategy order = OrderStrategy::Ochiai;
  int reflexion_max_iters = 3;
  int max_tool_calls = 25;
  int max_tokens = 4096;
  TokenBudget budget;
  double budget_safety_factor = 0.9;  // shrinks the usable limit to absorb
                                      // token counter underestimation
  std::string model;  // empty = backend default

  std::string context_reason_template = kContextReasonTemplateId;
  std::string prioritize_template = kContextPrioritizeTemplateId;
  std::string debugger_template = kDebuggerTemplateId;
  std::string debugger_single_template = kDebuggerSingleTemplateId;
  std::string reviewer_template = kReviewerCritiqueTemplateId;
  std::string finalize_template = kReviewerFinalizeTemplateId;

  void validate() const;  // throws InvalidConfig
  std::string to_json() const;
};

// Shared handles every agent call needs.
struct AgentEnv {
  Backend& backend;
  const PromptLibrary& prompts;
  const PipelineConfig& config;
  Clock& clock;
  std::vector<std::string>* warnings = nullptr;
};

// -------------------------------------------------------------------- agents

// Asks for the three-section failure summary (test purpose, expected output,
// failure reason), with one repair round for replies missing a section.
// Throws Precondition on empty test code, MissingSection after repair.
FailureReason extract_failure_reason(AgentEnv& env, const FailureContext& ctx,
                                     Transcript* transcript);

// Asks which of the group's methods relate to the failure. Returns them in
// reply order; ids outside the group are dropped with a warning; empty is
// legal. Throws UnparsableReply after one repair round.
std::vector<MethodId> prioritize_group(AgentEnv& env, const FailureReason& reason,
                                       const FailureContext& ctx,
                                       const std::vector<MethodId>& group, int group_index,
                                       int group_count, Transcript* transcript);

struct DebugResult {
  std::vector<ReasonedMethod> reasoned;  // the analyzed set
  RankedList ranking;                    // stage "debugger", methods within `reasoned`
};

// Navigation-and-ranking pass: with navigation enabled the model may call
// get_method_body / get_call_graph against the graph; every retrieved method
// joins the analyzed set. The final ranking is limited to prioritized or
// retrieved methods. Throws ToolLoopExhausted, UnparsableRanking.
DebugResult debug_and_rank(AgentEnv& env, const FailureReason& reason,
                           const FailureContext& ctx,
                           const std::vector<MethodId>& prioritized, const CodeGraph& graph,
                           Transcript* transcript);

// Critique loop over the debugger's ranking: up to reflexion_max_iters
// revisions, stopping early when two consecutive rankings agree, then one
// finalization pass that adds a fix per entry. Returns stage "final".
RankedList review_and_rerank(AgentEnv& env, const RankedList& initial,
                             const FailureContext& ctx, const CodeGraph& graph,
                             Transcript* transcript);

// ---------------------------------------------------------------- pipeline

struct LocalizationStats {
  int backend_calls = 0;
  int tool_calls = 0;
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct LocalizationResult {
  std::string fault_id;
  RankedList final_ranking;  // stage "final"
  Transcript context_transcript;
  Transcript debugger_transcript;
  Transcript reviewer_transcript;
  LocalizationStats stats;
  std::vector<std::string> warnings;
  PipelineConfig config;
  double elapsed_seconds = 0;

  std::string ranking_json() const;
};

// End-to-end run for one fault: order the covered methods, preprocess the
// first failing test's evidence, extract and prioritize context, debug, and
// (unless disabled) review. `clock` defaults to a logical clock so scripted
// runs serialize identically.
LocalizationResult localize(const FaultBundle& bundle, const PipelineConfig& config,
                            Backend& backend, Clock* clock = nullptr);

// Backend-free bundle summary: coverage stats, top scores and the division
// preview, as JSON.
std::string inspect(const FaultBundle& bundle, const PipelineConfig& config);

}  // namespace faultnav
