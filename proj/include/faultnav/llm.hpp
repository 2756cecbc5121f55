#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faultnav/method_id.hpp"

namespace faultnav {

// ---------------------------------------------------------------- chat types

struct ToolCall {
  std::string id;
  std::string name;
  std::string arguments;  // JSON text

  bool operator==(const ToolCall&) const = default;
};

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant" | "tool"
  std::string content;
  std::vector<ToolCall> tool_calls;  // assistant messages only
  std::string tool_call_id;          // tool messages only
  std::string name;                  // tool messages: the tool's name

  bool operator==(const ChatMessage&) const = default;
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::string parameters_schema;  // JSON schema text

  bool operator==(const ToolSpec&) const = default;
};

struct CompletionRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  std::vector<ToolSpec> tools;
  double temperature = 0.0;
  int max_tokens = 0;  // 0 = backend default

  bool operator==(const CompletionRequest&) const = default;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;

  bool operator==(const Usage&) const = default;
};

struct CompletionResponse {
  ChatMessage message;          // role "assistant"
  std::string finish_reason;    // "stop" | "tool_calls"
  Usage usage;

  bool operator==(const CompletionResponse&) const = default;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
  virtual std::string describe() const = 0;
};

// ----------------------------------------------------------------- transcript

// Timestamp source. The logical clock emits "0", "1", ... so that scripted
// runs serialize byte-identically; the wall clock emits UTC ISO 8601.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::string now() = 0;
};

class LogicalClock : public Clock {
 public:
  std::string now() override { return std::to_string(next_++); }

 private:
  long next_ = 0;
};

class WallClock : public Clock {
 public:
  std::string now() override;
};

struct Exchange {
  CompletionRequest request;
  CompletionResponse response;
  std::string timestamp;

  bool operator==(const Exchange&) const = default;
};

struct ToolExecution {
  int after_exchange = 0;  // index into Transcript::exchanges
  std::string call_id;
  std::string tool_name;
  std::string arguments;
  std::string result;
  bool is_error = false;

  bool operator==(const ToolExecution&) const = default;
};

struct Transcript {
  std::string agent;
  std::string fault_id;
  std::vector<Exchange> exchanges;
  std::vector<ToolExecution> tool_executions;

  std::string to_json() const;  // carries "transcript_version": 1
  static Transcript from_json(const std::string& text);

  bool operator==(const Transcript&) const = default;
};

// Runs one completion, recording the exchange when `transcript` is given.
CompletionResponse complete(Backend& backend, const CompletionRequest& request,
                            Transcript* transcript, Clock* clock);

// --------------------------------------------------------------- mock backend

// One scripted assistant reply. When a matcher is set, the latest user or
// tool message must satisfy it, otherwise the run fails loudly.
struct ScriptStep {
  std::optional<std::string> match_substring;
  std::optional<std::string> match_regex;
  std::string content;
  std::vector<ToolCall> tool_calls;  // ids assigned at reply time
};

struct MockScript {
  std::vector<ScriptStep> steps;
  int token_limit = 0;  // 0 = unlimited; otherwise oversize requests fail

  // `{"steps": [{"match_substring"?, "match_regex"?, "content",
  //   "tool_calls"?: [{"name", "arguments"}]}...], "token_limit"?: n}`.
  // "arguments" may be a JSON object (stored as its compact text) or a string.
  static MockScript load(const std::string& json_text);
};

// Deterministic scripted backend: replies are consumed in order, every
// mismatch or over-consumption raises MockScriptError. Usage numbers come
// from the heuristic token counter, so identical runs produce identical
// transcripts.
class MockBackend : public Backend {
 public:
  explicit MockBackend(MockScript script);

  CompletionResponse complete(const CompletionRequest& request) override;
  std::string describe() const override { return "mock"; }

  int steps_consumed() const { return next_step_; }
  bool exhausted() const { return next_step_ >= static_cast<int>(script_.steps.size()); }

 private:
  MockScript script_;
  int next_step_ = 0;
  int next_call_id_ = 1;
};

// Backend that replays the responses recorded in a transcript, in order.
std::unique_ptr<Backend> replay_backend(const Transcript& transcript);

// ------------------------------------------------------------------ tool loop

// Handler turns argument JSON into a result string; exceptions become
// tool-error messages fed back to the model.
using ToolHandler = std::function<std::string(const std::string& arguments_json)>;

class ToolRegistry {
 public:
  void add(ToolSpec spec, ToolHandler handler);
  const std::vector<ToolSpec>& specs() const { return specs_; }
  bool empty() const { return specs_.empty(); }
  // Runs the named tool. Unknown tools and handler exceptions produce
  // (error message, true).
  std::pair<std::string, bool> run(const std::string& name, const std::string& arguments) const;

 private:
  std::vector<ToolSpec> specs_;
  std::map<std::string, ToolHandler> handlers_;
};

struct ToolLoopResult {
  ChatMessage final_message;
  std::vector<ChatMessage> conversation;  // full message list, final reply included
  int tool_calls_executed = 0;
  int backend_calls = 0;
};

// Drives backend turns until the model stops requesting tools. Once
// `max_tool_calls` executions are reached the model is told to answer
// without tools; a reply that still requests tools raises ToolLoopExhausted.
ToolLoopResult run_tool_loop(Backend& backend, CompletionRequest request,
                             const ToolRegistry& registry, int max_tool_calls,
                             Transcript* transcript, Clock* clock);

// ------------------------------------------------------------- reply parsing

struct ParsedRankingEntry {
  MethodId method;
  std::string reasoning;
  std::optional<std::string> fix;
};

struct ParsedRanking {
  std::vector<ParsedRankingEntry> entries;  // final order; ordinals are implied
};

// Extracts a ranking from free-form model output. Candidates are JSON values
// in fenced code blocks, then any balanced array/object in the text; accepted
// shapes are a bare array of {"method", "rank"?, "reasoning"?, "fix"?}
// entries or an object carrying such an array under "ranking". Entries are
// ordered by "rank" (ties and missing ranks keep text order), deduplicated
// keeping the first occurrence, and limited to `allowed` when given
// (drops are reported through `warnings`). Throws UnparsableRanking when no
// candidate has a usable entry.
ParsedRanking parse_structured_ranking(const std::string& text,
                                       const std::set<std::string>* allowed,
                                       std::vector<std::string>* warnings);

// Extracts a JSON array of method id strings (same candidate scan). Invalid
// ids are dropped with a warning. Returns nullopt when no array is found.
std::optional<std::vector<MethodId>> parse_method_id_array(const std::string& text,
                                                           std::vector<std::string>* warnings);

// Raw text of every parseable balanced JSON value in `text`, candidates
// inside fenced ``` blocks first, in scan order.
std::vector<std::string> json_payloads(const std::string& text);

}  // namespace faultnav
