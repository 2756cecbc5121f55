// Release gate: one independently checkable property per line of output.
// Every oracle here is computed from scratch, never from the library's own
// intermediate results, so a regression in the engine cannot hide itself.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "faultnav/agents.hpp"
#include "faultnav/bundle.hpp"
#include "faultnav/codegraph.hpp"
#include "faultnav/division.hpp"
#include "faultnav/errors.hpp"
#include "faultnav/evalbench.hpp"
#include "faultnav/llm.hpp"
#include "faultnav/method_id.hpp"
#include "faultnav/preprocess.hpp"
#include "faultnav/prompts.hpp"
#include "faultnav/remote_backend.hpp"
#include "faultnav/spectra.hpp"

using nlohmann::json;
using namespace faultnav;

namespace {

struct Criterion {
  int number = 0;
  std::string label;
  bool skipped = false;
  std::string skip_reason;
  std::vector<std::string> problems;
};

void expect(Criterion& c, bool ok, const std::string& what) {
  if (!ok && c.problems.size() < 32) c.problems.push_back(what);
}

bool overloaded(const Criterion& c) { return c.problems.size() >= 10; }

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    if (ch == '\n') {
      out.push_back(current);
      current.clear();
    } else {
      current += ch;
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ------------------------------------------------------------ scripted corpus

// A self-contained synthetic fault: four ranked methods with distinct
// suspiciousness, one failing test resolvable through the call graph, and a
// stack trace pointing into the test's span.
struct SyntheticFault {
  FaultBundle bundle;
  std::vector<MethodId> ranked;  // descending suspiciousness
  MethodId test_id;
  std::string trace_raw;
  std::string reason_reply;
};

SyntheticFault make_fault(int i) {
  const std::string pkg = "corp" + std::to_string(i);
  SyntheticFault f;
  const char* names[] = {"alpha", "bravo", "gamma", "delta"};
  for (const char* name : names) f.ranked.push_back(MethodId{pkg, "Widget", name, "int"});
  f.test_id = MethodId{pkg, "WidgetTest", "testAlpha", ""};

  json methods = json::array();
  for (size_t j = 0; j < f.ranked.size(); ++j) {
    methods.push_back({{"id", f.ranked[j].canonical()},
                       {"file", "Widget.java"},
                       {"body", std::string("int ") + names[j] + "(int v) {\n  return v + " +
                                    std::to_string(j + 1) + ";\n}"}});
  }
  methods.push_back({{"id", f.test_id.canonical()},
                     {"file", "WidgetTest.java"},
                     {"start_line", 10},
                     {"end_line", 13},
                     {"body",
                      "void testAlpha() {\n  int got = alpha(1);\n  assertEquals(2, got);\n}"}});
  json edges = json::array({json::array({4, 0}), json::array({0, 1}), json::array({1, 2})});
  f.bundle.graph = CodeGraph::load(json{{"methods", methods}, {"edges", edges}}.dump());

  f.bundle.fault_id = "synth" + std::to_string(i);
  f.bundle.project_prefixes = {pkg};
  f.trace_raw = "widget failure " + std::to_string(i) + "\n\tat " + pkg +
                ".WidgetTest.testAlpha(WidgetTest.java:12)\n"
                "\tat org.junit.Assert.assertEquals(Assert.java:100)\n";
  f.bundle.matrix.tests = {
      {pkg + ".WidgetTest#testAlpha", TestOutcome::Fail, f.trace_raw},
      {pkg + ".WidgetTest#testBravo", TestOutcome::Pass, std::nullopt},
      {pkg + ".WidgetTest#testGamma", TestOutcome::Pass, std::nullopt},
  };
  f.bundle.matrix.entries = {
      {f.ranked[0], {0}, {true, false, false}},
      {f.ranked[1], {0}, {true, true, false}},
      {f.ranked[2], {0}, {true, true, true}},
      {f.ranked[3], {0}, {false, true, false}},
  };
  f.reason_reply = "## Test Purpose:\nChecks widget " + std::to_string(i) +
                   " arithmetic.\n## Expected Output:\nThe call returns 2.\n"
                   "## Failure Reason:\nWidget " +
                   std::to_string(i) + " increments with the wrong offset.\n";
  return f;
}

ScriptStep text_step(const std::string& match, const std::string& content) {
  ScriptStep s;
  s.match_substring = match;
  s.content = content;
  return s;
}

ScriptStep tool_step(const std::string& match, const std::string& tool, const MethodId& id) {
  ScriptStep s;
  s.match_substring = match;
  ToolCall call;
  call.name = tool;
  call.arguments = json{{"method", id.canonical()}}.dump();
  s.tool_calls.push_back(call);
  return s;
}

json debugger_rank_json(const SyntheticFault& f) {
  return json{{"analyzed", json::array({{{"method", f.ranked[0].canonical()},
                                         {"reasoning", "increment uses a fixed offset"}}})},
              {"ranking",
               json::array({{{"rank", 1},
                             {"method", f.ranked[0].canonical()},
                             {"reasoning", "offset off by one"}},
                            {{"rank", 2},
                             {"method", f.ranked[1].canonical()},
                             {"reasoning", "consumes the offset"}}})}};
}

json reviewer_rank_json(const SyntheticFault& f, bool alpha_first) {
  const MethodId& top = alpha_first ? f.ranked[0] : f.ranked[1];
  const MethodId& next = alpha_first ? f.ranked[1] : f.ranked[0];
  return json{{"ranking", json::array({{{"rank", 1},
                                        {"method", top.canonical()},
                                        {"reasoning", "misuses the propagated value"}},
                                       {{"rank", 2},
                                        {"method", next.canonical()},
                                        {"reasoning", "feeds the value in"}}})}};
}

json final_rank_json(const SyntheticFault& f, bool alpha_first) {
  json doc = reviewer_rank_json(f, alpha_first);
  doc["ranking"][0]["fix"] = "scale before adding";
  doc["ranking"][1]["fix"] = "guard the increment";
  return doc;
}

std::vector<ScriptStep> full_steps(const SyntheticFault& f) {
  return {
      text_step("Analyze the test body", f.reason_reply),
      text_step("group 1 of 2",
                json::array({f.ranked[0].canonical(), f.ranked[1].canonical()}).dump()),
      text_step("group 2 of 2", json::array({f.ranked[2].canonical()}).dump()),
      tool_step("Prioritized methods:", "get_method_body", f.ranked[0]),
      tool_step("return v + 1", "get_call_graph", f.ranked[0]),
      text_step("callers:", debugger_rank_json(f).dump()),
      text_step("critique the current ranking", reviewer_rank_json(f, false).dump()),
      text_step("Reflect again", reviewer_rank_json(f, false).dump()),
      text_step("generate a probable fix", final_rank_json(f, false).dump()),
  };
}

// Token limit that splits the four ranked methods into exactly two
// prioritization groups once the scripted failure reason is in the prompt.
int two_group_token_limit(const SyntheticFault& f, const PipelineConfig& cfg) {
  PromptLibrary prompts;
  const PromptTemplate& tmpl = prompts.get(cfg.prioritize_template);
  const int overhead =
      heuristic_token_count(render_template(tmpl, {{"failure_reason", f.reason_reply},
                                                   {"methods", ""},
                                                   {"group_index", "0"},
                                                   {"group_count", "0"}}));
  int first_two = 0;
  for (int j = 0; j < 2; ++j) {
    first_two += heuristic_token_count("- " + f.ranked[j].canonical() + "\n");
  }
  return overhead + first_two;
}

LocalizationResult run_scripted(const SyntheticFault& f, const PipelineConfig& cfg,
                                const std::vector<ScriptStep>& steps, Criterion& c,
                                const std::string& tag) {
  MockBackend backend(MockScript{steps, 0});
  LocalizationResult result = localize(f.bundle, cfg, backend);
  expect(c, backend.exhausted(), tag + ": script not fully consumed");
  return result;
}

// ----------------------------------------------------------------- criterion 1

void criterion_scores(Criterion& c) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(811);
  long checked = 0;
  for (int iter = 0; iter < 1000 && !overloaded(c); ++iter) {
    const int tests = 1 + static_cast<int>(rng() % 8);
    const int methods = 1 + static_cast<int>(rng() % 8);
    CoverageMatrix m;
    for (int t = 0; t < tests; ++t) {
      m.tests.push_back(
          {"p.Sweep#t" + std::to_string(t), rng() % 2 == 0 ? TestOutcome::Fail : TestOutcome::Pass,
           std::nullopt});
    }
    for (int j = 0; j < methods; ++j) {
      CoverageEntry e;
      e.method = MethodId{"p", "Sweep", "m" + std::to_string(j), ""};
      e.statements = {0};
      for (int t = 0; t < tests; ++t) e.covered_by.push_back(rng() % 2 == 0);
      m.entries.push_back(e);
    }

    const auto scores = ochiai(m);
    if (scores.size() != m.entries.size()) {
      expect(c, false, "score list size diverges from the entry count");
      continue;
    }
    std::map<std::string, const SuspiciousnessScore*> by_id;
    for (const auto& s : scores) by_id[s.method.canonical()] = &s;
    for (const auto& e : m.entries) {
      int ef = 0, ep = 0, nf = 0, np = 0;
      for (size_t t = 0; t < m.tests.size(); ++t) {
        const bool fails = m.tests[t].outcome == TestOutcome::Fail;
        if (e.covered_by[t] && fails) ++ef;
        else if (e.covered_by[t]) ++ep;
        else if (fails) ++nf;
        else ++np;
      }
      const double denom = std::sqrt(double(ef + nf) * double(ef + ep));
      const double want = (ef == 0 || denom == 0.0) ? 0.0 : ef / denom;
      auto it = by_id.find(e.method.canonical());
      if (it == by_id.end()) {
        expect(c, false, "missing score for " + e.method.canonical());
        continue;
      }
      const SuspiciousnessScore& got = *it->second;
      expect(c, got.e_f == ef && got.e_p == ep && got.n_f == nf && got.n_p == np,
             "coverage counters diverge for " + e.method.canonical());
      expect(c, std::fabs(got.score - want) <= 1e-12,
             "score diverges from the oracle for " + e.method.canonical());
      if (ef == 0) expect(c, got.score == 0.0, "uncovered-by-failing score must be exactly zero");
      ++checked;
    }
    for (size_t i = 1; i < scores.size(); ++i) {
      const bool ordered =
          scores[i - 1].score > scores[i].score ||
          (scores[i - 1].score == scores[i].score &&
           scores[i - 1].method.canonical() < scores[i].method.canonical());
      expect(c, ordered, "score list is not in descending, tie-broken order");
    }
  }

  CoverageMatrix edge;
  edge.tests = {{"p.Edge#f1", TestOutcome::Fail, std::nullopt},
                {"p.Edge#f2", TestOutcome::Fail, std::nullopt},
                {"p.Edge#p1", TestOutcome::Pass, std::nullopt}};
  edge.entries = {{MethodId{"p", "Edge", "onlyFailing", ""}, {0}, {true, true, false}},
                  {MethodId{"p", "Edge", "onlyPassing", ""}, {0}, {false, false, true}}};
  for (const auto& s : ochiai(edge)) {
    if (s.method.method_name == "onlyFailing") {
      expect(c, s.score == 1.0, "exclusively failing-covered method must score exactly 1");
    } else {
      expect(c, s.score == 0.0, "passing-only method must score exactly 0");
    }
  }

  expect(c, checked > 3000, "random sweep was unexpectedly small");
  expect(c, seconds_since(start) < 5.0, "score sweep exceeded five seconds");
}

// ----------------------------------------------------------------- criterion 2

void criterion_division(Criterion& c) {
  {
    std::vector<DivisionInput> entries;
    for (int i = 0; i < 1000; ++i) {
      entries.push_back({MethodId{"p", "Bulk", "m" + std::to_string(i), ""}, 500});
    }
    const DivisionPlan plan = divide(entries, 128000, 1000);
    expect(c, plan.k() == 4,
           "uniform 1000x500 plan at limit 128000 overhead 1000 needs 4 groups, got " +
               std::to_string(plan.k()));
    const size_t sizes[] = {254, 254, 254, 238};
    for (int g = 0; g < plan.k() && g < 4; ++g) {
      expect(c, plan.groups[g].size() == sizes[g],
             "uniform plan group " + std::to_string(g) + " has " +
                 std::to_string(plan.groups[g].size()) + " methods");
      expect(c, plan.per_group_tokens[g] == static_cast<int>(sizes[g]) * 500,
             "uniform plan group " + std::to_string(g) + " token total is off");
    }
  }

  std::mt19937 rng(812);
  for (int iter = 0; iter < 1000 && !overloaded(c); ++iter) {
    const int n = 1 + static_cast<int>(rng() % 40);
    const int overhead = static_cast<int>(rng() % 21);
    const int budget = 40 + static_cast<int>(rng() % 161);
    std::vector<DivisionInput> entries;
    for (int i = 0; i < n; ++i) {
      entries.push_back({MethodId{"p", "Rand", "m" + std::to_string(i), ""},
                         1 + static_cast<int>(rng() % 40)});
    }
    const DivisionPlan plan = divide(entries, overhead + budget, overhead);

    std::vector<std::string> flat;
    for (const auto& group : plan.groups) {
      expect(c, !group.empty(), "plans must not contain empty groups");
      for (const auto& id : group) flat.push_back(id.canonical());
    }
    bool same_order = flat.size() == entries.size();
    for (size_t i = 0; same_order && i < flat.size(); ++i) {
      same_order = flat[i] == entries[i].method.canonical();
    }
    expect(c, same_order, "groups are not an order-preserving partition of the input");
    if (!same_order) continue;

    size_t cursor = 0;
    for (int g = 0; g < plan.k(); ++g) {
      int sum = 0;
      for (size_t j = 0; j < plan.groups[g].size(); ++j) sum += entries[cursor++].tokens;
      expect(c, sum <= budget, "group token total exceeds the budget");
      expect(c, sum == plan.per_group_tokens[g], "recorded group token total is wrong");
      if (g + 1 < plan.k()) {
        expect(c, sum + entries[cursor].tokens > budget,
               "group closed although the next entry still fits");
      }
    }
    // Entries arrive most-suspicious first, so a prefix partition keeps every
    // group at least as suspicious as the next; the boundary indexes prove it.
  }

  try {
    divide({{MethodId{"p", "Rand", "huge", ""}, 50}}, 60, 20);
    expect(c, false, "entry above the per-group budget must be rejected");
  } catch (const Error& e) {
    expect(c, e.code() == ErrorCode::EntryExceedsBudget,
           "oversized entry raised the wrong error code");
  }
}

// ----------------------------------------------------------------- criterion 3

void criterion_preprocess(Criterion& c) {
  std::mt19937 rng(813);
  int fixtures = 0;

  for (int iter = 0; iter < 12 && !overloaded(c); ++iter) {
    std::string raw;
    const int header_lines = 1 + static_cast<int>(rng() % 3);
    for (int h = 0; h < header_lines; ++h) {
      raw += "failure detail " + std::to_string(h) + "\n";
    }
    const int frame_count = 1 + static_cast<int>(rng() % 10);
    for (int fidx = 0; fidx < frame_count; ++fidx) {
      switch (rng() % 4) {
        case 0:
          raw += "\tat app.core.Worker.step" + std::to_string(fidx) + "(Worker.java:" +
                 std::to_string(10 + fidx) + ")\n";
          break;
        case 1:
          raw += "\tat app.util.Buf.grow(Buf.java:33)\n";
          break;
        case 2:
          raw += "\tat java.util.ArrayList.get(ArrayList.java:433)\n";
          break;
        default:
          raw += "\tat org.junit.Assert.fail(Assert.java:86)\n";
          break;
      }
    }
    const StackTrace trace = parse_stack_trace(raw);
    expect(c, trace.frames.size() == static_cast<size_t>(frame_count),
           "parsed frame count diverges");

    StackTrace want;
    want.header = trace.header;
    for (const auto& frame : trace.frames) {
      if (frame.qualified_class().rfind("app.", 0) == 0) want.frames.push_back(frame);
    }
    const StackTrace pruned = prune_to_project(trace, {"app."});
    expect(c, pruned == want, "pruning diverges from a direct prefix filter");
    expect(c, prune_to_project(pruned, {"app."}) == pruned, "trace pruning is not idempotent");
    expect(c, prune_to_project(trace, {}) == trace, "empty prefix list must keep every frame");
    ++fixtures;
  }

  {
    const std::string raw =
        "java.lang.IllegalArgumentException: Invalid locale format: _GB\n"
        "\tat org.apache.commons.lang.LocaleUtils.toLocale(LocaleUtils.java:94)\n"
        "\tat org.apache.commons.lang.LocaleUtilsTest.testLang328(LocaleUtilsTest.java:515)\n"
        "\tat junit.framework.TestCase.runTest(TestCase.java:154)\n"
        "\tat java.lang.reflect.Method.invoke(Method.java:39)\n";
    const StackTrace pruned =
        prune_to_project(parse_stack_trace(raw), {"org.apache.commons.lang"});
    expect(c, pruned.frames.size() == 2, "library-shaped trace must keep two project frames");
    if (pruned.frames.size() == 2) {
      expect(c, pruned.frames[0].method_name == "toLocale" && pruned.frames[0].line == 94,
             "innermost project frame was not preserved first");
      expect(c, pruned.frames[1].class_name == "LocaleUtilsTest",
             "test frame was not preserved second");
    }
    expect(c, pruned.header == "java.lang.IllegalArgumentException: Invalid locale format: _GB",
           "header must survive pruning verbatim");
    ++fixtures;
  }

  const CodeGraph no_helpers = CodeGraph::load(R"({"methods": [], "edges": []})");
  for (int iter = 0; iter < 12 && !overloaded(c); ++iter) {
    const int line_count = 3 + static_cast<int>(rng() % 10);
    std::vector<std::string> body_lines{"void probe() {"};
    for (int l = 1; l < line_count; ++l) {
      switch (rng() % 4) {
        case 0:
          body_lines.push_back("  if (flag" + std::to_string(l) + ") {");
          break;
        case 1:
          body_lines.push_back("  }");
          break;
        default:
          body_lines.push_back("  work" + std::to_string(l) + "();");
          break;
      }
    }
    std::string body;
    for (const auto& line : body_lines) body += line + "\n";
    const int failing = 1 + static_cast<int>(rng() % line_count);
    const MethodId probe{"app", "ProbeTest", "probe", ""};

    const PreprocessedTest processed = preprocess_test(no_helpers, probe, body, failing);
    const auto in_lines = split_lines(body);
    const auto out_lines = split_lines(processed.pruned_body);
    expect(c, out_lines.size() >= static_cast<size_t>(failing),
           "pruned body lost kept lines");
    bool prefix_ok = out_lines.size() >= static_cast<size_t>(failing);
    for (int i = 0; prefix_ok && i < failing; ++i) prefix_ok = out_lines[i] == in_lines[i];
    expect(c, prefix_ok, "kept region must be a byte-for-byte prefix of the input");
    for (size_t i = failing; i < out_lines.size(); ++i) {
      expect(c, out_lines[i] == "}", "appended repair lines must be bare closers");
    }
    const PreprocessedTest again =
        preprocess_test(no_helpers, probe, processed.pruned_body, failing);
    expect(c, again.pruned_body == processed.pruned_body, "test pruning is not idempotent");
    ++fixtures;
  }

  expect(c, fixtures >= 20, "fixture count fell below twenty");
}

// ----------------------------------------------------------------- criterion 4

void criterion_graph(Criterion& c) {
  std::mt19937 rng(814);
  for (int g = 0; g < 10 && !overloaded(c); ++g) {
    json methods = json::array();
    for (int i = 0; i < 50; ++i) {
      methods.push_back({{"id", "g$Node#m" + std::to_string(i) + "()"},
                         {"file", "Node.java"},
                         {"body", "int m" + std::to_string(i) + "() { return " +
                                      std::to_string(i) + "; }"}});
    }
    std::set<std::pair<int, int>> edge_set;
    json edges = json::array();
    const int edge_count = 80 + static_cast<int>(rng() % 80);
    for (int e = 0; e < edge_count; ++e) {
      const int a = static_cast<int>(rng() % 50);
      const int b = static_cast<int>(rng() % 50);
      if (a == b) continue;
      edges.push_back(json::array({a, b}));
      if (e % 7 == 0) edges.push_back(json::array({a, b}));  // duplicates must collapse
      edge_set.insert({a, b});
    }
    const CodeGraph graph = CodeGraph::load(json{{"methods", methods}, {"edges", edges}}.dump());
    expect(c, graph.size() == 50, "graph lost or invented methods on load");

    std::vector<std::vector<std::string>> callers_of(50), callees_of(50);
    for (const auto& [a, b] : edge_set) {
      callers_of[b].push_back("g$Node#m" + std::to_string(a) + "()");
      callees_of[a].push_back("g$Node#m" + std::to_string(b) + "()");
    }
    for (auto& v : callers_of) std::sort(v.begin(), v.end());
    for (auto& v : callees_of) std::sort(v.begin(), v.end());

    for (int q = 0; q < 100 && !overloaded(c); ++q) {
      if (rng() % 5 == 0) {
        const MethodId ghost{"g", "Node", "zz" + std::to_string(rng() % 1000), ""};
        try {
          graph.get_method_body(ghost);
          expect(c, false, "unknown id must not produce a method body");
        } catch (const Error& e) {
          expect(c, e.code() == ErrorCode::MethodNotFound, "wrong error for an unknown body id");
        }
        try {
          graph.get_call_graph(ghost);
          expect(c, false, "unknown id must not produce neighbors");
        } catch (const Error& e) {
          expect(c, e.code() == ErrorCode::MethodNotFound,
                 "wrong error for an unknown neighbor id");
        }
        continue;
      }
      const int i = static_cast<int>(rng() % 50);
      const MethodId id{"g", "Node", "m" + std::to_string(i), ""};
      const MethodNode& node = graph.get_method_body(id);
      expect(c, node.id == id, "body lookup answered with a different method");

      const NeighborReport report = graph.get_call_graph(id);
      std::vector<std::string> got_callers, got_callees;
      for (const auto& m : report.callers) got_callers.push_back(m.canonical());
      for (const auto& m : report.callees) got_callees.push_back(m.canonical());
      expect(c, got_callers == callers_of[i], "caller list diverges from the edge oracle");
      expect(c, got_callees == callees_of[i], "callee list diverges from the edge oracle");
      for (const auto& m : report.callers) {
        expect(c, graph.contains(m), "caller outside the graph: " + m.canonical());
      }
      for (const auto& m : report.callees) {
        expect(c, graph.contains(m), "callee outside the graph: " + m.canonical());
        const NeighborReport back = graph.get_call_graph(m);
        bool symmetric = false;
        for (const auto& caller : back.callers) symmetric = symmetric || caller == id;
        expect(c, symmetric, "callee does not list the caller back");
      }
    }
  }
}

// ----------------------------------------------------------------- criterion 5

void criterion_corpus(Criterion& c) {
  const auto start = std::chrono::steady_clock::now();
  for (int i = 1; i <= 5 && !overloaded(c); ++i) {
    const SyntheticFault f = make_fault(i);
    const std::string tag = f.bundle.fault_id;

    PipelineConfig cfg;
    cfg.budget_safety_factor = 1.0;
    cfg.budget.limit = two_group_token_limit(f, cfg);

    const auto steps = full_steps(f);
    const LocalizationResult a = run_scripted(f, cfg, steps, c, tag + " run 1");
    const LocalizationResult b = run_scripted(f, cfg, steps, c, tag + " run 2");
    const LocalizationResult d = run_scripted(f, cfg, steps, c, tag + " run 3");
    expect(c, a.ranking_json() == b.ranking_json() && b.ranking_json() == d.ranking_json(),
           tag + ": ranking bytes differ across identical runs");
    const auto transcripts = [](const LocalizationResult& r) {
      return r.context_transcript.to_json() + r.debugger_transcript.to_json() +
             r.reviewer_transcript.to_json();
    };
    expect(c, transcripts(a) == transcripts(b) && transcripts(b) == transcripts(d),
           tag + ": transcript bytes differ across identical runs");

    expect(c, a.final_ranking.stage == "final", tag + ": wrong final stage");
    expect(c, a.final_ranking.entries.size() == 2, tag + ": wrong final ranking size");
    if (a.final_ranking.entries.size() == 2) {
      expect(c, a.final_ranking.entries[0].method == f.ranked[1],
             tag + ": review did not promote the revised top method");
      for (const auto& entry : a.final_ranking.entries) {
        expect(c, entry.fix.has_value() && !entry.fix->empty(),
               tag + ": final entry lacks a fix");
      }
    }
    expect(c, a.context_transcript.exchanges.size() == 3,
           tag + ": context agent must run one reason and two group exchanges");
    expect(c, a.debugger_transcript.exchanges.size() == 3 &&
                  a.debugger_transcript.tool_executions.size() == 2,
           tag + ": debugger shape diverges");
    expect(c, a.reviewer_transcript.exchanges.size() == 3, tag + ": reviewer shape diverges");
    expect(c, a.stats.backend_calls == 9 && a.stats.tool_calls == 2,
           tag + ": stats diverge from the scripted shape");
    expect(c, a.stats.prompt_tokens > 0 && a.stats.completion_tokens > 0,
           tag + ": token usage was not accumulated");

    // navigation off: same division, no tools anywhere
    {
      PipelineConfig ablated = cfg;
      ablated.enable_navigation = false;
      const std::vector<ScriptStep> nav_free = {
          steps[0], steps[1], steps[2],
          text_step("using only the information provided", debugger_rank_json(f).dump()),
          steps[6], steps[7], steps[8]};
      const LocalizationResult r = run_scripted(f, ablated, nav_free, c, tag + " nonav");
      const size_t tools = r.context_transcript.tool_executions.size() +
                           r.debugger_transcript.tool_executions.size() +
                           r.reviewer_transcript.tool_executions.size();
      expect(c, tools == 0, tag + ": navigation-off run still executed tools");
      expect(c, r.stats.tool_calls == 0, tag + ": navigation-off stats count tool calls");
      expect(c, r.debugger_transcript.exchanges.size() == 1,
             tag + ": navigation-off debugger must answer in one exchange");
      bool advertised = false;
      for (const Transcript* t :
           {&r.context_transcript, &r.debugger_transcript, &r.reviewer_transcript}) {
        for (const auto& ex : t->exchanges) advertised = advertised || !ex.request.tools.empty();
      }
      expect(c, !advertised, tag + ": navigation-off run still advertised tools");
    }

    // division off: a single prioritization group
    {
      PipelineConfig ablated = cfg;
      ablated.enable_division = false;
      const std::vector<ScriptStep> one_group = {
          steps[0],
          text_step("group 1 of 1", json::array({f.ranked[0].canonical(),
                                                 f.ranked[1].canonical(),
                                                 f.ranked[2].canonical()})
                                        .dump()),
          steps[3], steps[4], steps[5], steps[6], steps[7], steps[8]};
      const LocalizationResult r = run_scripted(f, ablated, one_group, c, tag + " nodiv");
      expect(c, r.context_transcript.exchanges.size() == 2,
             tag + ": division-off context agent must run exactly two exchanges");
      expect(c, r.stats.backend_calls == 8, tag + ": division-off call count diverges");
      const json doc = json::parse(inspect(f.bundle, ablated));
      expect(c, doc["division"]["enabled"] == false && doc["division"]["k"] == 1,
             tag + ": division-off summary still plans multiple groups");
    }

    // review off: the debugger's ranking ships as final
    {
      PipelineConfig ablated = cfg;
      ablated.enable_reflexion = false;
      const std::vector<ScriptStep> no_review = {steps[0], steps[1], steps[2],
                                                 steps[3], steps[4], steps[5]};
      const LocalizationResult r = run_scripted(f, ablated, no_review, c, tag + " norefl");
      expect(c, r.reviewer_transcript.exchanges.size() == 0,
             tag + ": review-off run still consulted the reviewer");
      expect(c, r.stats.backend_calls == 6, tag + ": review-off call count diverges");
      expect(c, r.final_ranking.stage == "final", tag + ": review-off stage must read final");
      expect(c, !r.final_ranking.entries.empty() && !r.final_ranking.entries[0].fix.has_value(),
             tag + ": review-off entries must carry no fixes");
    }
  }
  expect(c, seconds_since(start) < 10.0, "corpus runs exceeded ten seconds");
}

// ----------------------------------------------------------------- criterion 6

void criterion_review_loop(Criterion& c) {
  const SyntheticFault f = make_fault(9);
  PromptLibrary prompts;
  PipelineConfig cfg;  // three review iterations by default

  FailureContext ctx;
  ctx.test_id = f.test_id;
  ctx.pruned_trace = prune_to_project(parse_stack_trace(f.trace_raw), f.bundle.project_prefixes);
  ctx.pruned_test_code = "void testAlpha() {\n  int got = alpha(1);\n  assertEquals(2, got);\n}";
  ctx.failure_reason = f.reason_reply;

  RankedList initial;
  initial.stage = "debugger";
  initial.entries = {{f.ranked[0], 1, "offset off by one", std::nullopt},
                     {f.ranked[1], 2, "consumes the offset", std::nullopt}};

  {
    MockBackend backend(MockScript{
        {text_step("critique the current ranking", reviewer_rank_json(f, false).dump()),
         text_step("Reflect again", reviewer_rank_json(f, false).dump()),
         text_step("generate a probable fix", final_rank_json(f, false).dump())},
        0});
    LogicalClock clock;
    std::vector<std::string> warnings;
    AgentEnv env{backend, prompts, cfg, clock, &warnings};
    Transcript transcript;
    const RankedList out = review_and_rerank(env, initial, ctx, f.bundle.graph, &transcript);
    expect(c, backend.steps_consumed() == 3,
           "stabilizing review must stop after the repeated ranking");
    expect(c, transcript.exchanges.size() == 3, "stabilizing review exchange count diverges");
    expect(c, out.stage == "final", "review output stage must read final");
    expect(c, out.entries.size() == 2 && out.entries[0].method == f.ranked[1],
           "review did not adopt the revised order");
    for (const auto& entry : out.entries) {
      expect(c, entry.fix.has_value() && !entry.fix->empty(),
             "stabilized entry is missing its fix");
    }
  }

  {
    MockBackend backend(MockScript{
        {text_step("critique the current ranking", reviewer_rank_json(f, false).dump()),
         text_step("Reflect again", reviewer_rank_json(f, true).dump()),
         text_step("Reflect again", reviewer_rank_json(f, false).dump()),
         text_step("generate a probable fix", final_rank_json(f, false).dump())},
        0});
    LogicalClock clock;
    std::vector<std::string> warnings;
    AgentEnv env{backend, prompts, cfg, clock, &warnings};
    Transcript transcript;
    const RankedList out = review_and_rerank(env, initial, ctx, f.bundle.graph, &transcript);
    expect(c, backend.steps_consumed() == 4,
           "oscillating review must stop at the iteration cap");
    expect(c, transcript.exchanges.size() == 4, "oscillating review exchange count diverges");
    expect(c, out.stage == "final" && out.entries.size() == 2,
           "capped review must still finalize a full ranking");
    for (const auto& entry : out.entries) {
      expect(c, entry.fix.has_value() && !entry.fix->empty(), "capped entry is missing its fix");
    }
  }
}

// ----------------------------------------------------------------- criterion 7

void criterion_evaluator(Criterion& c) {
  const auto target = [](int i) {
    return MethodId{"ev", "Case", "target" + std::to_string(i), ""};
  };
  const auto filler = [](int i, int j) {
    return MethodId{"ev", "Case", "noise" + std::to_string(i) + "_" + std::to_string(j), ""};
  };

  std::map<std::string, RankedList> rankings;
  std::vector<GroundTruth> truth;
  const int best[] = {3, 1, 7, 0, 2};  // 0 = faulty method absent from the ranking
  for (int i = 0; i < 5; ++i) {
    const std::string fault = "f" + std::to_string(i + 1);
    truth.push_back({fault, {target(i)}});
    RankedList list;
    list.stage = "final";
    const int length = best[i] == 0 ? 3 : std::max(best[i], 3);
    for (int r = 1; r <= length; ++r) {
      const MethodId id = (best[i] != 0 && r == best[i]) ? target(i) : filler(i, r);
      list.entries.push_back({id, r, "noted", std::nullopt});
    }
    rankings[fault] = list;
  }

  const TopNReport report = top_n(rankings, truth);
  const std::map<int, int> want_counts{{1, 1}, {3, 3}, {5, 3}, {10, 4}};
  expect(c, report.counts == want_counts, "hand-counted five-fault totals diverge");
  const std::map<std::string, std::optional<int>> want_best{
      {"f1", 3}, {"f2", 1}, {"f3", 7}, {"f4", std::nullopt}, {"f5", 2}};
  expect(c, report.per_fault == want_best, "per-fault best ranks diverge");
  expect(c, report.warnings.empty(), "fully ranked corpus must not warn");

  std::vector<GroundTruth> with_ghost = truth;
  with_ghost.push_back({"f9", {target(8)}});
  const TopNReport ghost = top_n(rankings, with_ghost);
  expect(c, ghost.counts == want_counts, "a missing ranking must count as a miss");
  expect(c,
         ghost.warnings.size() == 1 &&
             ghost.warnings[0].find("no ranking for fault f9") != std::string::npos,
         "missing ranking must be reported once");

  std::mt19937 rng(817);
  for (int iter = 0; iter < 200 && !overloaded(c); ++iter) {
    const int faults = 1 + static_cast<int>(rng() % 8);
    std::map<std::string, RankedList> rnd_rankings;
    std::vector<GroundTruth> rnd_truth;
    for (int i = 0; i < faults; ++i) {
      const std::string fault = "r" + std::to_string(i);
      rnd_truth.push_back({fault, {target(i)}});
      if (rng() % 5 == 0) continue;  // absent ranking
      RankedList list;
      list.stage = "final";
      const int hit = static_cast<int>(rng() % 13);  // 0 = never ranked
      const int length = std::max(hit, 1 + static_cast<int>(rng() % 12));
      for (int r = 1; r <= length; ++r) {
        const MethodId id = (hit != 0 && r == hit) ? target(i) : filler(i, r);
        list.entries.push_back({id, r, "", std::nullopt});
      }
      rnd_rankings[fault] = list;
    }
    const TopNReport rnd = top_n(rnd_rankings, rnd_truth);
    int previous = -1;
    for (int n : kTopNValues) {
      const auto it = rnd.counts.find(n);
      if (it == rnd.counts.end()) {
        expect(c, false, "count missing for a standard cutoff");
        continue;
      }
      expect(c, it->second >= previous, "counts must be monotone in the cutoff");
      previous = it->second;
      int direct = 0;
      for (const auto& [fault, bestRank] : rnd.per_fault) {
        if (bestRank.has_value() && *bestRank <= n) ++direct;
      }
      expect(c, direct == it->second, "count diverges from a direct per-fault scan");
    }
  }
}

// ----------------------------------------------------------------- criterion 8

void criterion_roundtrip(Criterion& c) {
  for (int i = 1; i <= 5; ++i) {
    const SyntheticFault f = make_fault(i);
    const std::string tag = f.bundle.fault_id;
    const std::string spectra = serialize_spectra(f.bundle.matrix);
    const std::string matrix = serialize_matrix(f.bundle.matrix);
    const std::string tests = serialize_tests(f.bundle.matrix);
    const CoverageMatrix back = parse_spectra(spectra, matrix, tests);
    expect(c, back == f.bundle.matrix, tag + ": coverage round-trip changed the matrix");
    expect(c,
           serialize_spectra(back) == spectra && serialize_matrix(back) == matrix &&
               serialize_tests(back) == tests,
           tag + ": second coverage serialization is not byte-stable");

    const std::string graph_text = f.bundle.graph.serialize();
    const CodeGraph graph_back = CodeGraph::load(graph_text);
    expect(c, graph_back == f.bundle.graph, tag + ": graph round-trip changed the graph");
    expect(c, graph_back.serialize() == graph_text,
           tag + ": second graph serialization is not byte-stable");
  }

  {
    CoverageMatrix tricky;
    tricky.tests = {
        {"q.Tricky#quoted", TestOutcome::Fail,
         std::string("panic: \"inner, quoted\"\n\tat q.Tricky.quoted(Tricky.java:8)")},
        {"q.Tricky#plain", TestOutcome::Pass, std::nullopt},
    };
    tricky.entries = {{MethodId{"q", "Tricky", "quoted", ""}, {0}, {true, false}},
                      {MethodId{"q", "Tricky", "plain", ""}, {0}, {true, true}}};
    const CoverageMatrix back = parse_spectra(
        serialize_spectra(tricky), serialize_matrix(tricky), serialize_tests(tricky));
    expect(c, back == tricky, "quoted multi-line trace did not survive the round-trip");
  }

  {
    RankingFile file;
    file.fault_id = "synth1";
    file.ranking.stage = "final";
    file.ranking.entries = {
        {MethodId{"corp1", "Widget", "bravo", "int"}, 1, "misuses the propagated value",
         std::string("scale before adding")},
        {MethodId{"corp1", "Widget", "alpha", "int"}, 2, "feeds the value in", std::nullopt}};
    const std::string text = file.serialize();
    const RankingFile back = RankingFile::parse(text);
    expect(c, back.serialize() == text, "ranking file round-trip is not byte-stable");
  }

  {
    const std::vector<GroundTruth> truth{
        {"f1", {MethodId{"corp1", "Widget", "alpha", "int"}}},
        {"f2",
         {MethodId{"corp1", "Widget", "bravo", "int"}, MethodId{"corp1", "Widget", "gamma", "int"}}}};
    const std::string text = serialize_ground_truth(truth);
    expect(c, parse_ground_truth(text) == truth, "ground truth round-trip changed the content");
    expect(c, serialize_ground_truth(parse_ground_truth(text)) == text,
           "second truth serialization is not byte-stable");
  }
}

// ----------------------------------------------------------------- criterion 9

void criterion_live(Criterion& c) {
  const char* key = std::getenv("FL_API_KEY");
  if (key == nullptr || *key == '\0') {
    c.skipped = true;
    c.skip_reason = "FL_API_KEY not set";
    return;
  }
  const SyntheticFault f = make_fault(7);
  RemoteBackend backend(RemoteConfig::from_env());
  PipelineConfig cfg;
  WallClock wall;
  const LocalizationResult result = localize(f.bundle, cfg, backend, &wall);
  expect(c, !result.final_ranking.entries.empty(), "live run produced an empty ranking");
  expect(c, result.final_ranking.stage == "final", "live run did not reach the final stage");
  for (const Transcript* t : {&result.context_transcript, &result.debugger_transcript,
                              &result.reviewer_transcript}) {
    for (const auto& exchange : t->exchanges) {
      expect(c, exchange.request.temperature == 0.0, "live requests must pin temperature 0");
    }
  }
}

}  // namespace

int main() {
  std::vector<Criterion> results;
  const auto run = [&results](int number, const std::string& label,
                              const std::function<void(Criterion&)>& body) {
    Criterion crit;
    crit.number = number;
    crit.label = label;
    try {
      body(crit);
    } catch (const Error& e) {
      expect(crit, false, std::string("unexpected error: ") + e.what());
    } catch (const std::exception& e) {
      expect(crit, false, std::string("unexpected exception: ") + e.what());
    }
    results.push_back(std::move(crit));
  };

  run(1, "suspiciousness scores match a brute-force oracle", criterion_scores);
  run(2, "division plans keep partition, order and budget invariants", criterion_division);
  run(3, "trace and test pruning are exact and idempotent", criterion_preprocess);
  run(4, "graph retrieval answers only with graph-resident methods", criterion_graph);
  run(5, "scripted corpus runs are byte-identical and ablations change transcripts",
      criterion_corpus);
  run(6, "review loop stops early on agreement and respects its cap", criterion_review_loop);
  run(7, "top-N evaluation matches hand counts and stays monotone", criterion_evaluator);
  run(8, "file formats round-trip unchanged", criterion_roundtrip);
  run(9, "live endpoint smoke", criterion_live);

  bool failed = false;
  for (const auto& crit : results) {
    const char* verdict =
        crit.skipped ? "[SKIP]" : (crit.problems.empty() ? "[PASS]" : "[FAIL]");
    std::cout << verdict << " criterion " << crit.number << ": " << crit.label;
    if (crit.skipped) std::cout << " (" << crit.skip_reason << ")";
    std::cout << "\n";
    size_t shown = 0;
    for (const auto& problem : crit.problems) {
      if (++shown > 6) {
        std::cout << "       ... " << crit.problems.size() - 6 << " more\n";
        break;
      }
      std::cout << "       - " << problem << "\n";
    }
    if (!crit.skipped && !crit.problems.empty()) failed = true;
  }
  return failed ? 1 : 0;
}
