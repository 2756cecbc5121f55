#include "faultnav/llm.hpp"

#include <algorithm>
#include <ctime>
#include <regex>

#include <json.hpp>

#include "faultnav/division.hpp"
#include "faultnav/errors.hpp"

namespace faultnav {

using nlohmann::json;

// ------------------------------------------------------------- serialization

void to_json(json& j, const ToolCall& c) {
  j = json{{"id", c.id}, {"name", c.name}, {"arguments", c.arguments}};
}

void from_json(const json& j, ToolCall& c) {
  c.id = j.value("id", "");
  c.name = j.at("name").get<std::string>();
  c.arguments = j.value("arguments", "");
}

void to_json(json& j, const ChatMessage& m) {
  j = json{{"role", m.role}, {"content", m.content}};
  if (!m.tool_calls.empty()) j["tool_calls"] = m.tool_calls;
  if (!m.tool_call_id.empty()) j["tool_call_id"] = m.tool_call_id;
  if (!m.name.empty()) j["name"] = m.name;
}

void from_json(const json& j, ChatMessage& m) {
  m.role = j.at("role").get<std::string>();
  m.content = j.value("content", "");
  m.tool_calls = j.value("tool_calls", std::vector<ToolCall>{});
  m.tool_call_id = j.value("tool_call_id", "");
  m.name = j.value("name", "");
}

void to_json(json& j, const ToolSpec& s) {
  j = json{{"name", s.name},
           {"description", s.description},
           {"parameters_schema", s.parameters_schema}};
}

void from_json(const json& j, ToolSpec& s) {
  s.name = j.at("name").get<std::string>();
  s.description = j.value("description", "");
  s.parameters_schema = j.value("parameters_schema", "");
}

void to_json(json& j, const CompletionRequest& r) {
  j = json{{"model", r.model}, {"messages", r.messages}, {"temperature", r.temperature}};
  if (!r.tools.empty()) j["tools"] = r.tools;
  if (r.max_tokens > 0) j["max_tokens"] = r.max_tokens;
}

void from_json(const json& j, CompletionRequest& r) {
  r.model = j.value("model", "");
  r.messages = j.value("messages", std::vector<ChatMessage>{});
  r.tools = j.value("tools", std::vector<ToolSpec>{});
  r.temperature = j.value("temperature", 0.0);
  r.max_tokens = j.value("max_tokens", 0);
}

void to_json(json& j, const Usage& u) {
  j = json{{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}};
}

void from_json(const json& j, Usage& u) {
  u.prompt_tokens = j.value("prompt_tokens", 0);
  u.completion_tokens = j.value("completion_tokens", 0);
}

void to_json(json& j, const CompletionResponse& r) {
  j = json{{"message", r.message}, {"finish_reason", r.finish_reason}, {"usage", r.usage}};
}

void from_json(const json& j, CompletionResponse& r) {
  r.message = j.at("message").get<ChatMessage>();
  r.finish_reason = j.value("finish_reason", "stop");
  r.usage = j.value("usage", Usage{});
}

void to_json(json& j, const Exchange& e) {
  j = json{{"request", e.request}, {"response", e.response}, {"timestamp", e.timestamp}};
}

void from_json(const json& j, Exchange& e) {
  e.request = j.at("request").get<CompletionRequest>();
  e.response = j.at("response").get<CompletionResponse>();
  e.timestamp = j.value("timestamp", "");
}

void to_json(json& j, const ToolExecution& t) {
  j = json{{"after_exchange", t.after_exchange}, {"call_id", t.call_id},
           {"tool_name", t.tool_name},          {"arguments", t.arguments},
           {"result", t.result},                {"is_error", t.is_error}};
}

void from_json(const json& j, ToolExecution& t) {
  t.after_exchange = j.value("after_exchange", 0);
  t.call_id = j.value("call_id", "");
  t.tool_name = j.value("tool_name", "");
  t.arguments = j.value("arguments", "");
  t.result = j.value("result", "");
  t.is_error = j.value("is_error", false);
}

std::string Transcript::to_json() const {
  json j{{"transcript_version", 1},
         {"agent", agent},
         {"fault_id", fault_id},
         {"exchanges", exchanges},
         {"tool_executions", tool_executions}};
  return j.dump(2) + "\n";
}

Transcript Transcript::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, std::string("invalid transcript JSON: ") + e.what());
  }
  if (j.value("transcript_version", 0) != 1) {
    raise(ErrorCode::IoError, "unsupported transcript_version");
  }
  Transcript t;
  t.agent = j.value("agent", "");
  t.fault_id = j.value("fault_id", "");
  t.exchanges = j.value("exchanges", std::vector<Exchange>{});
  t.tool_executions = j.value("tool_executions", std::vector<ToolExecution>{});
  return t;
}

std::string WallClock::now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CompletionResponse complete(Backend& backend, const CompletionRequest& request,
                            Transcript* transcript, Clock* clock) {
  CompletionResponse response = backend.complete(request);
  if (transcript) {
    Exchange e;
    e.request = request;
    e.response = response;
    e.timestamp = clock ? clock->now() : "";
    transcript->exchanges.push_back(std::move(e));
  }
  return response;
}

// --------------------------------------------------------------- mock backend

MockScript MockScript::load(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    raise(ErrorCode::MockScriptError, std::string("invalid script JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("steps") || !doc["steps"].is_array()) {
    raise(ErrorCode::MockScriptError, "script must be an object with a \"steps\" array");
  }
  MockScript script;
  script.token_limit = doc.value("token_limit", 0);
  for (const auto& s : doc["steps"]) {
    ScriptStep step;
    if (s.contains("match_substring")) step.match_substring = s["match_substring"].get<std::string>();
    if (s.contains("match_regex")) step.match_regex = s["match_regex"].get<std::string>();
    step.content = s.value("content", "");
    if (s.contains("tool_calls")) {
      for (const auto& c : s["tool_calls"]) {
        ToolCall call;
        call.name = c.at("name").get<std::string>();
        const auto& args = c.at("arguments");
        call.arguments = args.is_string() ? args.get<std::string>() : args.dump();
        step.tool_calls.push_back(std::move(call));
      }
    }
    script.steps.push_back(std::move(step));
  }
  return script;
}

MockBackend::MockBackend(MockScript script) : script_(std::move(script)) {}

namespace {

int request_token_count(const CompletionRequest& request) {
  int total = 0;
  for (const auto& m : request.messages) {
    total += heuristic_token_count(m.content);
    for (const auto& c : m.tool_calls) total += heuristic_token_count(c.arguments);
  }
  for (const auto& t : request.tools) {
    total += heuristic_token_count(t.description) + heuristic_token_count(t.parameters_schema);
  }
  return total;
}

std::string excerpt(const std::string& text, size_t limit = 160) {
  if (text.size() <= limit) return text;
  return text.substr(0, limit) + "...";
}

}  // namespace

CompletionResponse MockBackend::complete(const CompletionRequest& request) {
  const int prompt_tokens = request_token_count(request);
  if (script_.token_limit > 0 && prompt_tokens > script_.token_limit) {
    raise(ErrorCode::ContextOverflow,
          "request needs " + std::to_string(prompt_tokens) + " tokens, limit is " +
              std::to_string(script_.token_limit));
  }
  if (next_step_ >= static_cast<int>(script_.steps.size())) {
    raise(ErrorCode::MockScriptError,
          "script exhausted after " + std::to_string(next_step_) + " steps");
  }
  const ScriptStep& step = script_.steps[next_step_];

  if (step.match_substring || step.match_regex) {
    const ChatMessage* latest = nullptr;
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
      if (it->role == "user" || it->role == "tool") {
        latest = &*it;
        break;
      }
    }
    const std::string content = latest ? latest->content : "";
    if (step.match_substring && content.find(*step.match_substring) == std::string::npos) {
      raise(ErrorCode::MockScriptError,
            "step " + std::to_string(next_step_) + " expected substring \"" +
                *step.match_substring + "\", latest message was \"" + excerpt(content) + "\"");
    }
    if (step.match_regex && !std::regex_search(content, std::regex(*step.match_regex))) {
      raise(ErrorCode::MockScriptError,
            "step " + std::to_string(next_step_) + " expected pattern \"" + *step.match_regex +
                "\", latest message was \"" + excerpt(content) + "\"");
    }
  }

  CompletionResponse response;
  response.message.role = "assistant";
  response.message.content = step.content;
  int completion_tokens = heuristic_token_count(step.content);
  for (const auto& c : step.tool_calls) {
    ToolCall call = c;
    call.id = "call_" + std::to_string(next_call_id_++);
    completion_tokens += heuristic_token_count(call.arguments);
    response.message.tool_calls.push_back(std::move(call));
  }
  response.finish_reason = response.message.tool_calls.empty() ? "stop" : "tool_calls";
  response.usage = {prompt_tokens, completion_tokens};
  ++next_step_;
  return response;
}

std::unique_ptr<Backend> replay_backend(const Transcript& transcript) {
  MockScript script;
  for (const auto& e : transcript.exchanges) {
    ScriptStep step;
    step.content = e.response.message.content;
    for (const auto& c : e.response.message.tool_calls) step.tool_calls.push_back(c);
    script.steps.push_back(std::move(step));
  }
  return std::make_unique<MockBackend>(std::move(script));
}

// ------------------------------------------------------------------ tool loop

void ToolRegistry::add(ToolSpec spec, ToolHandler handler) {
  handlers_[spec.name] = std::move(handler);
  specs_.push_back(std::move(spec));
}

std::pair<std::string, bool> ToolRegistry::run(const std::string& name,
                                               const std::string& arguments) const {
  auto it = handlers_.find(name);
  if (it == handlers_.end()) return {"unknown tool: " + name, true};
  try {
    return {it->second(arguments), false};
  } catch (const std::exception& e) {
    return {e.what(), true};
  }
}

ToolLoopResult run_tool_loop(Backend& backend, CompletionRequest request,
                             const ToolRegistry& registry, int max_tool_calls,
                             Transcript* transcript, Clock* clock) {
  if (max_tool_calls < 0) raise(ErrorCode::InvalidConfig, "tool call limit must be >= 0");
  request.tools = registry.specs();

  ToolLoopResult result;
  while (true) {
    const bool forced = result.tool_calls_executed >= max_tool_calls;
    if (forced) {
      ChatMessage nudge;
      nudge.role = "user";
      nudge.content =
          "Tool call limit reached. Provide your final answer now, with no further tool calls.";
      request.messages.push_back(std::move(nudge));
    }
    CompletionResponse response = complete(backend, request, transcript, clock);
    ++result.backend_calls;
    request.messages.push_back(response.message);

    if (response.message.tool_calls.empty()) {
      result.final_message = response.message;
      result.conversation = std::move(request.messages);
      return result;
    }
    if (forced) {
      raise(ErrorCode::ToolLoopExhausted,
            "model kept requesting tools after " + std::to_string(result.tool_calls_executed) +
                " executions");
    }
    for (const auto& call : response.message.tool_calls) {
      auto [output, is_error] = registry.run(call.name, call.arguments);
      ChatMessage tool_msg;
      tool_msg.role = "tool";
      tool_msg.tool_call_id = call.id;
      tool_msg.name = call.name;
      tool_msg.content = is_error ? "error: " + output : output;
      request.messages.push_back(std::move(tool_msg));
      if (transcript) {
        ToolExecution exec;
        exec.after_exchange = static_cast<int>(transcript->exchanges.size()) - 1;
        exec.call_id = call.id;
        exec.tool_name = call.name;
        exec.arguments = call.arguments;
        exec.result = output;
        exec.is_error = is_error;
        transcript->tool_executions.push_back(std::move(exec));
      }
      ++result.tool_calls_executed;
    }
  }
}

// ------------------------------------------------------------- reply parsing

namespace {

// Extent of one balanced JSON value starting at `start` ('[' or '{'),
// tracking strings and escapes. npos when unbalanced.
size_t balanced_extent(const std::string& text, size_t start) {
  int depth = 0;
  bool in_string = false;
  for (size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      --depth;
      if (depth == 0) return i + 1;
      if (depth < 0) return std::string::npos;
    }
  }
  return std::string::npos;
}

void warn(std::vector<std::string>* warnings, std::string message) {
  if (warnings) warnings->push_back(std::move(message));
}

// Parsed forms of json_payloads, in the same order.
std::vector<json> json_candidates(const std::string& text) {
  std::vector<json> found;
  for (const auto& payload : json_payloads(text)) {
    found.push_back(json::parse(payload));
  }
  return found;
}

}  // namespace

std::vector<std::string> json_payloads(const std::string& text) {
  std::vector<std::string> regions;
  size_t pos = 0;
  while (true) {
    size_t open = text.find("```", pos);
    if (open == std::string::npos) break;
    size_t body = text.find('\n', open + 3);  // skip the language tag line
    if (body == std::string::npos) break;
    size_t close = text.find("```", body);
    if (close == std::string::npos) break;
    regions.push_back(text.substr(body + 1, close - body - 1));
    pos = close + 3;
  }
  regions.push_back(text);

  std::vector<std::string> found;
  for (const auto& region : regions) {
    for (size_t i = 0; i < region.size(); ++i) {
      if (region[i] != '[' && region[i] != '{') continue;
      size_t end = balanced_extent(region, i);
      if (end == std::string::npos) continue;
      std::string payload = region.substr(i, end - i);
      if (!json::parse(payload, nullptr, false).is_discarded()) {
        found.push_back(std::move(payload));
        i = end - 1;
      }
    }
  }
  return found;
}

ParsedRanking parse_structured_ranking(const std::string& text,
                                       const std::set<std::string>* allowed,
                                       std::vector<std::string>* warnings) {
  for (const auto& candidate : json_candidates(text)) {
    const json* items = nullptr;
    if (candidate.is_array()) {
      items = &candidate;
    } else if (candidate.is_object() && candidate.contains("ranking") &&
               candidate["ranking"].is_array()) {
      items = &candidate["ranking"];
    } else {
      continue;
    }

    struct Raw {
      double rank_key;
      ParsedRankingEntry entry;
    };
    std::vector<Raw> raws;
    for (const auto& item : *items) {
      std::string method_text;
      ParsedRankingEntry entry;
      if (item.is_string()) {
        method_text = item.get<std::string>();
      } else if (item.is_object() && item.contains("method") && item["method"].is_string()) {
        method_text = item["method"].get<std::string>();
        if (item.contains("reasoning") && item["reasoning"].is_string()) {
          entry.reasoning = item["reasoning"].get<std::string>();
        }
        if (item.contains("fix") && item["fix"].is_string()) {
          entry.fix = item["fix"].get<std::string>();
        }
      } else {
        continue;
      }
      try {
        entry.method = MethodId::parse(method_text);
      } catch (const Error&) {
        warn(warnings, "unparsable method id in ranking: " + method_text);
        continue;
      }
      double rank_key = static_cast<double>(raws.size()) + 1.0;
      if (item.is_object() && item.contains("rank") && item["rank"].is_number()) {
        rank_key = item["rank"].get<double>();
      }
      raws.push_back({rank_key, std::move(entry)});
    }
    if (raws.empty()) continue;

    std::stable_sort(raws.begin(), raws.end(),
                     [](const Raw& a, const Raw& b) { return a.rank_key < b.rank_key; });

    ParsedRanking out;
    std::set<std::string> seen;
    for (auto& raw : raws) {
      const std::string canon = raw.entry.method.canonical();
      if (!seen.insert(canon).second) continue;
      if (allowed && !allowed->count(canon)) {
        warn(warnings, "dropped ranked method outside the candidate set: " + canon);
        continue;
      }
      out.entries.push_back(std::move(raw.entry));
    }
    return out;
  }
  raise(ErrorCode::UnparsableRanking, "no ranking found in reply: " + excerpt(text));
}

std::optional<std::vector<MethodId>> parse_method_id_array(const std::string& text,
                                                           std::vector<std::string>* warnings) {
  for (const auto& candidate : json_candidates(text)) {
    if (!candidate.is_array()) continue;
    bool all_strings = true;
    for (const auto& item : candidate) {
      if (!item.is_string()) {
        all_strings = false;
        break;
      }
    }
    if (!all_strings) continue;
    std::vector<MethodId> ids;
    for (const auto& item : candidate) {
      try {
        ids.push_back(MethodId::parse(item.get<std::string>()));
      } catch (const Error&) {
        warn(warnings, "unparsable method id in list: " + item.get<std::string>());
      }
    }
    return ids;
  }
  return std::nullopt;
}

}  // namespace faultnav
