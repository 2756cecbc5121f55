#include "faultnav/agents.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <map>
#include <set>

#include <json.hpp>

#include "faultnav/errors.hpp"

namespace faultnav {

using nlohmann::json;

namespace {

const char* kContextSystem =
    "You are a software test analyst in an automated fault localization pipeline.";
const char* kDebuggerSystem =
    "You are a debugger agent in an automated fault localization pipeline.";
const char* kReviewerSystem =
    "You are a code review agent in an automated fault localization pipeline.";

const char* kSectionRepair =
    "Your reply was missing one or more required sections. Reply again with exactly the "
    "three sections ## Test Purpose: ## Expected Output: ## Failure Reason:";
const char* kIdArrayRepair =
    "Reply with only a JSON array of method identifiers chosen from the group, most "
    "suspicious first.";
const char* kRankingRepair =
    "Reply with only the JSON ranking object, no prose: "
    "{\"ranking\": [{\"rank\": 1, \"method\": \"<id>\", \"reasoning\": \"<why>\"}, ...]}";
const char* kFinalizeRepair =
    "Reply with only the JSON ranking object, including a non-empty \"fix\" for every "
    "entry.";
const char* kReflectAgain =
    "Reflect again on your revised ranking. Identify any remaining inconsistencies and "
    "reply with the updated JSON ranking. If the ranking is already correct, return it "
    "unchanged.";
const char* kNavigationHint =
    " If additional insights are needed, retrieve a method's implementation with "
    "get_method_body or its callers and callees with get_call_graph.";

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

ChatMessage system_message(const std::string& text) {
  ChatMessage m;
  m.role = "system";
  m.content = text;
  return m;
}

ChatMessage user_message(std::string text) {
  ChatMessage m;
  m.role = "user";
  m.content = std::move(text);
  return m;
}

CompletionRequest base_request(const PipelineConfig& config, const char* system_text) {
  CompletionRequest req;
  req.model = config.model;
  req.temperature = 0.0;
  req.max_tokens = config.max_tokens;
  req.messages.push_back(system_message(system_text));
  return req;
}

std::string bullet_list(const std::vector<MethodId>& ids) {
  std::string out;
  for (const auto& id : ids) out += "- " + id.canonical() + "\n";
  return out;
}

void warn(AgentEnv& env, std::string message) {
  if (env.warnings) env.warnings->push_back(std::move(message));
}

// ------------------------------------------------------- failure reason reply

// Matches "test purpose" / "expected output" / "failure reason" headers with
// optional markdown decoration; returns the section index and any content
// that shares the header line.
int match_section_header(const std::string& line, std::string* rest) {
  static const char* kNames[] = {"test purpose", "expected output", "failure reason"};
  std::string t = trim(line);
  size_t i = 0;
  while (i < t.size() && (t[i] == '#' || t[i] == '*' || t[i] == ' ')) ++i;
  std::string lowered;
  for (size_t j = i; j < t.size(); ++j) {
    lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(t[j]))));
  }
  for (int section = 0; section < 3; ++section) {
    const std::string name = kNames[section];
    if (lowered.rfind(name, 0) != 0) continue;
    std::string after = t.substr(i + name.size());
    size_t k = 0;
    while (k < after.size() && (after[k] == '*' || after[k] == ':' || after[k] == ' ')) ++k;
    *rest = after.substr(k);
    return section;
  }
  return -1;
}

std::optional<FailureReason> parse_failure_sections(const std::string& text) {
  std::string sections[3];
  int current = -1;
  std::string line;
  auto flush_line = [&]() {
    std::string rest;
    int header = match_section_header(line, &rest);
    if (header >= 0) {
      current = header;
      if (!rest.empty()) sections[current] += rest + "\n";
    } else if (current >= 0) {
      sections[current] += line + "\n";
    }
    line.clear();
  };
  for (char c : text) {
    if (c == '\n') {
      flush_line();
    } else {
      line.push_back(c);
    }
  }
  flush_line();

  FailureReason reason;
  reason.test_purpose = trim(sections[0]);
  reason.expected_output = trim(sections[1]);
  reason.failure_reason = trim(sections[2]);
  reason.raw = text;
  if (reason.test_purpose.empty() || reason.expected_output.empty() ||
      reason.failure_reason.empty()) {
    return std::nullopt;
  }
  return reason;
}

// ----------------------------------------------------------- navigation tools

MethodId parse_tool_method_arg(const std::string& arguments) {
  json args = json::parse(arguments, nullptr, false);
  if (args.is_discarded() || !args.is_object() || !args.contains("method") ||
      !args["method"].is_string()) {
    raise(ErrorCode::Precondition,
          "arguments must be a JSON object {\"method\": \"<canonical method id>\"}");
  }
  return MethodId::parse(args["method"].get<std::string>());
}

void bind_navigation_tools(ToolRegistry& registry, const CodeGraph& graph,
                           std::vector<MethodId>* retrieved,
                           std::set<std::string>* retrieved_set) {
  const char* kMethodArgSchema =
      R"({"type":"object","properties":{"method":{"type":"string","description":"canonical method identifier"}},"required":["method"]})";
  registry.add(
      {"get_method_body",
       "Retrieve the stored source of a method by its canonical identifier.",
       kMethodArgSchema},
      [&graph, retrieved, retrieved_set](const std::string& arguments) {
        const MethodNode& node = graph.get_method_body(parse_tool_method_arg(arguments));
        if (retrieved_set->insert(node.id.canonical()).second) {
          retrieved->push_back(node.id);
        }
        std::string out = node.id.canonical() + "\n";
        if (!node.file.empty()) {
          out += "file: " + node.file;
          if (node.start_line != 0) {
            out += " lines " + std::to_string(node.start_line) + "-" +
                   std::to_string(node.end_line);
          }
          out += "\n";
        }
        return out + node.body;
      });
  registry.add(
      {"get_call_graph", "List the callers and callees of a method.", kMethodArgSchema},
      [&graph](const std::string& arguments) {
        NeighborReport report = graph.get_call_graph(parse_tool_method_arg(arguments));
        std::string out = "callers:";
        if (report.callers.empty()) out += " none";
        out += "\n";
        for (const auto& id : report.callers) out += "- " + id.canonical() + "\n";
        out += "callees:";
        if (report.callees.empty()) out += " none";
        out += "\n";
        for (const auto& id : report.callees) out += "- " + id.canonical() + "\n";
        return out;
      });
}

// -------------------------------------------------------------- ranking utils

RankedList to_ranked(const ParsedRanking& parsed, const std::string& stage) {
  RankedList list;
  list.stage = stage;
  int rank = 1;
  for (const auto& entry : parsed.entries) {
    RankedEntry e;
    e.method = entry.method;
    e.ordinal_rank = rank++;
    e.reasoning = entry.reasoning;
    e.fix = entry.fix;
    list.entries.push_back(std::move(e));
  }
  return list;
}

std::string ranking_as_prompt_json(const RankedList& list) {
  json arr = json::array();
  for (const auto& e : list.entries) {
    arr.push_back({{"rank", e.ordinal_rank},
                   {"method", e.method.canonical()},
                   {"reasoning", e.reasoning}});
  }
  return arr.dump(2);
}

// Parses the assistant reply in `reply_text`; on failure sends one repair
// prompt over `conversation` and parses that reply instead. The repair
// request carries no tools. `conversation` and `reply_text` are updated to
// the latest state.
ParsedRanking parse_ranking_with_repair(AgentEnv& env, std::vector<ChatMessage>& conversation,
                                        std::string& reply_text,
                                        const std::set<std::string>& allowed,
                                        Transcript* transcript) {
  try {
    return parse_structured_ranking(reply_text, &allowed, env.warnings);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnparsableRanking) throw;
  }
  CompletionRequest repair;
  repair.model = env.config.model;
  repair.temperature = 0.0;
  repair.max_tokens = env.config.max_tokens;
  repair.messages = conversation;
  repair.messages.push_back(user_message(kRankingRepair));
  CompletionResponse response = complete(env.backend, repair, transcript, &env.clock);
  conversation = std::move(repair.messages);
  conversation.push_back(response.message);
  reply_text = response.message.content;
  return parse_structured_ranking(reply_text, &allowed, env.warnings);
}

}  // namespace

// ------------------------------------------------------------------- helpers

std::string FailureContext::test_code_block() const {
  std::string out = pruned_test_code;
  for (const auto& helper : helper_bodies) {
    if (!out.empty() && out.back() != '\n') out.push_back('\n');
    out += "\n" + helper;
  }
  return out;
}

std::vector<std::string> RankedList::method_order() const {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.method.canonical());
  return out;
}

void PipelineConfig::validate() const {
  if (enable_reflexion && reflexion_max_iters < 1) {
    raise(ErrorCode::InvalidConfig, "reflexion_max_iters must be >= 1 when reflexion is on");
  }
  if (budget.limit <= 0) raise(ErrorCode::InvalidConfig, "token limit must be positive");
  if (budget_safety_factor <= 0.0 || budget_safety_factor > 1.0) {
    raise(ErrorCode::InvalidConfig, "budget_safety_factor must be in (0, 1]");
  }
  if (max_tool_calls < 0) raise(ErrorCode::InvalidConfig, "max_tool_calls must be >= 0");
  if (order == OrderStrategy::External) {
    // external scores themselves are checked at rank time
  }
}

std::string PipelineConfig::to_json() const {
  json j{{"enable_navigation", enable_navigation},
         {"enable_division", enable_division},
         {"enable_reflexion", enable_reflexion},
         {"order", order_strategy_name(order)},
         {"reflexion_max_iters", reflexion_max_iters},
         {"max_tool_calls", max_tool_calls},
         {"max_tokens", max_tokens},
         {"token_limit", budget.limit},
         {"token_counter", budget.counter_id},
         {"budget_safety_factor", budget_safety_factor},
         {"model", model},
         {"templates",
          {{"context_reason", context_reason_template},
           {"prioritize", prioritize_template},
           {"debugger", debugger_template},
           {"debugger_single", debugger_single_template},
           {"reviewer", reviewer_template},
           {"finalize", finalize_template}}}};
  return j.dump();
}

// -------------------------------------------------------------------- agents

FailureReason extract_failure_reason(AgentEnv& env, const FailureContext& ctx,
                                     Transcript* transcript) {
  if (trim(ctx.pruned_test_code).empty()) {
    raise(ErrorCode::Precondition, "test code is empty; nothing to analyze");
  }
  const PromptTemplate& tmpl = env.prompts.get(env.config.context_reason_template);
  std::map<std::string, std::string> values{{"test_code", ctx.test_code_block()},
                                            {"stack_trace", ctx.pruned_trace.render()}};
  CompletionRequest request = base_request(env.config, kContextSystem);
  request.messages.push_back(user_message(render_template(tmpl, values)));

  CompletionResponse response = complete(env.backend, request, transcript, &env.clock);
  auto parsed = parse_failure_sections(response.message.content);
  if (!parsed) {
    request.messages.push_back(response.message);
    request.messages.push_back(user_message(kSectionRepair));
    response = complete(env.backend, request, transcript, &env.clock);
    parsed = parse_failure_sections(response.message.content);
    if (!parsed) {
      raise(ErrorCode::MissingSection, "failure summary still incomplete after repair");
    }
  }
  return *parsed;
}

std::vector<MethodId> prioritize_group(AgentEnv& env, const FailureReason& reason,
                                       const FailureContext& ctx,
                                       const std::vector<MethodId>& group, int group_index,
                                       int group_count, Transcript* transcript) {
  (void)ctx;
  if (group.empty()) raise(ErrorCode::Precondition, "cannot prioritize an empty group");
  const PromptTemplate& tmpl = env.prompts.get(env.config.prioritize_template);
  std::map<std::string, std::string> values{{"failure_reason", reason.raw},
                                            {"methods", bullet_list(group)},
                                            {"group_index", std::to_string(group_index)},
                                            {"group_count", std::to_string(group_count)}};
  CompletionRequest request = base_request(env.config, kContextSystem);
  request.messages.push_back(user_message(render_template(tmpl, values)));

  CompletionResponse response = complete(env.backend, request, transcript, &env.clock);
  auto ids = parse_method_id_array(response.message.content, env.warnings);
  if (!ids) {
    request.messages.push_back(response.message);
    request.messages.push_back(user_message(kIdArrayRepair));
    response = complete(env.backend, request, transcript, &env.clock);
    ids = parse_method_id_array(response.message.content, env.warnings);
    if (!ids) {
      raise(ErrorCode::UnparsableReply,
            "group " + std::to_string(group_index) + " prioritization reply had no id array");
    }
  }

  std::set<std::string> members;
  for (const auto& id : group) members.insert(id.canonical());
  std::vector<MethodId> out;
  std::set<std::string> seen;
  for (const auto& id : *ids) {
    const std::string canon = id.canonical();
    if (!members.count(canon)) {
      warn(env, "group " + std::to_string(group_index) +
                    " prioritization named a method outside the group: " + canon);
      continue;
    }
    if (seen.insert(canon).second) out.push_back(id);
  }
  return out;
}

DebugResult debug_and_rank(AgentEnv& env, const FailureReason& reason,
                           const FailureContext& ctx,
                           const std::vector<MethodId>& prioritized, const CodeGraph& graph,
                           Transcript* transcript) {
  if (prioritized.empty()) {
    raise(ErrorCode::Precondition, "prioritized method list is empty");
  }
  std::vector<MethodId> retrieved;
  std::set<std::string> retrieved_set;
  ToolRegistry registry;
  if (env.config.enable_navigation) {
    bind_navigation_tools(registry, graph, &retrieved, &retrieved_set);
  }

  const PromptTemplate& tmpl = env.prompts.get(env.config.enable_navigation
                                                   ? env.config.debugger_template
                                                   : env.config.debugger_single_template);
  std::map<std::string, std::string> values{{"failure_reason", reason.raw},
                                            {"stack_trace", ctx.pruned_trace.render()},
                                            {"test_code", ctx.test_code_block()},
                                            {"prioritized_methods", bullet_list(prioritized)}};
  CompletionRequest request = base_request(env.config, kDebuggerSystem);
  request.messages.push_back(user_message(render_template(tmpl, values)));

  ToolLoopResult loop = run_tool_loop(env.backend, std::move(request), registry,
                                      env.config.max_tool_calls, transcript, &env.clock);

  std::set<std::string> prioritized_set;
  for (const auto& id : prioritized) prioritized_set.insert(id.canonical());
  std::set<std::string> allowed = prioritized_set;
  allowed.insert(retrieved_set.begin(), retrieved_set.end());

  std::vector<ChatMessage> conversation = std::move(loop.conversation);
  std::string reply = loop.final_message.content;
  ParsedRanking parsed = parse_ranking_with_repair(env, conversation, reply, allowed, transcript);

  DebugResult result;
  std::set<std::string> in_r;
  auto add_reasoned = [&](const MethodId& id, const std::string& reasoning) {
    const std::string canon = id.canonical();
    if (!in_r.insert(canon).second) return;
    ReasonedMethod rm;
    rm.method = id;
    rm.reasoning = reasoning;
    rm.visited_via = prioritized_set.count(canon) ? ReasonedMethod::Via::Prioritized
                                                  : ReasonedMethod::Via::Navigation;
    result.reasoned.push_back(std::move(rm));
  };

  // "analyzed" entries from the final reply, restricted to methods the run
  // actually saw (prioritized or retrieved).
  for (const auto& payload : json_payloads(reply)) {
    json candidate = json::parse(payload, nullptr, false);
    if (!candidate.is_object() || !candidate.contains("analyzed") ||
        !candidate["analyzed"].is_array()) {
      continue;
    }
    for (const auto& item : candidate["analyzed"]) {
      if (!item.is_object() || !item.contains("method") || !item["method"].is_string()) continue;
      const std::string text = item["method"].get<std::string>();
      MethodId id;
      try {
        id = MethodId::parse(text);
      } catch (const Error&) {
        warn(env, "unparsable method id in analyzed set: " + text);
        continue;
      }
      if (!allowed.count(id.canonical())) {
        warn(env, "analyzed set named a method the run never saw: " + id.canonical());
        continue;
      }
      std::string reasoning = "analyzed during fault navigation";
      if (item.contains("reasoning") && item["reasoning"].is_string()) {
        reasoning = item["reasoning"].get<std::string>();
      }
      add_reasoned(id, reasoning);
    }
    break;
  }
  for (const auto& entry : parsed.entries) {
    add_reasoned(entry.method,
                 entry.reasoning.empty() ? "ranked as suspicious" : entry.reasoning);
  }
  for (const auto& id : retrieved) {
    add_reasoned(id, "method body retrieved during call-graph navigation");
  }

  result.ranking = to_ranked(parsed, "debugger");
  return result;
}

RankedList review_and_rerank(AgentEnv& env, const RankedList& initial,
                             const FailureContext& ctx, const CodeGraph& graph,
                             Transcript* transcript) {
  if (initial.entries.empty()) {
    raise(ErrorCode::Precondition, "cannot review an empty ranking");
  }
  std::vector<MethodId> retrieved;
  std::set<std::string> retrieved_set;
  ToolRegistry registry;
  if (env.config.enable_navigation) {
    bind_navigation_tools(registry, graph, &retrieved, &retrieved_set);
  }

  const PromptTemplate& tmpl = env.prompts.get(env.config.reviewer_template);
  std::map<std::string, std::string> values{
      {"test_code", ctx.test_code_block()},
      {"stack_trace", ctx.pruned_trace.render()},
      {"ranking", ranking_as_prompt_json(initial)},
      {"navigation_hint", env.config.enable_navigation ? kNavigationHint : ""}};
  CompletionRequest seed = base_request(env.config, kReviewerSystem);
  seed.messages.push_back(user_message(render_template(tmpl, values)));

  std::set<std::string> base_allowed;
  for (const auto& e : initial.entries) base_allowed.insert(e.method.canonical());

  std::vector<ChatMessage> conversation = std::move(seed.messages);
  RankedList current = initial;
  std::optional<std::vector<std::string>> previous_order;
  for (int iter = 1; iter <= env.config.reflexion_max_iters; ++iter) {
    CompletionRequest request;
    request.model = env.config.model;
    request.temperature = 0.0;
    request.max_tokens = env.config.max_tokens;
    request.messages = conversation;
    if (iter > 1) request.messages.push_back(user_message(kReflectAgain));

    ToolLoopResult loop = run_tool_loop(env.backend, std::move(request), registry,
                                        env.config.max_tool_calls, transcript, &env.clock);
    conversation = std::move(loop.conversation);
    std::string reply = loop.final_message.content;

    std::set<std::string> allowed = base_allowed;
    allowed.insert(retrieved_set.begin(), retrieved_set.end());
    ParsedRanking parsed =
        parse_ranking_with_repair(env, conversation, reply, allowed, transcript);
    current = to_ranked(parsed, "reviewer_iter_" + std::to_string(iter));

    if (previous_order && current.method_order() == *previous_order) break;
    previous_order = current.method_order();
  }

  // Chain-of-thought finalization: fixes first, then the final re-rank. No
  // tools on this pass.
  const PromptTemplate& finalize = env.prompts.get(env.config.finalize_template);
  conversation.push_back(user_message(render_template(finalize, {})));
  CompletionRequest request;
  request.model = env.config.model;
  request.temperature = 0.0;
  request.max_tokens = env.config.max_tokens;
  request.messages = conversation;
  CompletionResponse response = complete(env.backend, request, transcript, &env.clock);
  conversation = std::move(request.messages);
  conversation.push_back(response.message);

  std::set<std::string> allowed;
  for (const auto& e : current.entries) allowed.insert(e.method.canonical());
  allowed.insert(retrieved_set.begin(), retrieved_set.end());

  auto attempt = [&](const std::string& text) -> std::optional<RankedList> {
    ParsedRanking parsed;
    try {
      parsed = parse_structured_ranking(text, &allowed, env.warnings);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparsableRanking) throw;
      return std::nullopt;
    }
    if (parsed.entries.empty()) return std::nullopt;
    for (const auto& entry : parsed.entries) {
      if (!entry.fix || trim(*entry.fix).empty()) return std::nullopt;
    }
    return to_ranked(parsed, "final");
  };

  auto final_list = attempt(response.message.content);
  if (!final_list) {
    conversation.push_back(user_message(kFinalizeRepair));
    CompletionRequest repair;
    repair.model = env.config.model;
    repair.temperature = 0.0;
    repair.max_tokens = env.config.max_tokens;
    repair.messages = conversation;
    response = complete(env.backend, repair, transcript, &env.clock);
    final_list = attempt(response.message.content);
    if (!final_list) {
      raise(ErrorCode::UnparsableRanking,
            "finalization did not produce a complete ranking with fixes");
    }
  }
  return *final_list;
}

}  // namespace faultnav
