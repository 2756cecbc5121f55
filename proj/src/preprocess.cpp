#include "faultnav/preprocess.hpp"

#include <algorithm>
#include <set>

#include "faultnav/errors.hpp"

namespace faultnav {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

// `at pkg.Class.method(File.java:42)` with optional generics-free inner
// classes; location may also be `Native Method` or `Unknown Source`.
bool parse_frame_line(const std::string& line, StackFrame& out) {
  std::string t = trim(line);
  if (t.rfind("at ", 0) != 0) return false;
  t = trim(t.substr(3));

  size_t open = t.rfind('(');
  if (open == std::string::npos || t.back() != ')') return false;
  std::string target = t.substr(0, open);
  std::string loc = t.substr(open + 1, t.size() - open - 2);

  size_t last_dot = target.rfind('.');
  if (last_dot == std::string::npos || last_dot == 0 || last_dot + 1 >= target.size()) {
    return false;
  }
  std::string qualified = target.substr(0, last_dot);
  out.method_name = target.substr(last_dot + 1);

  size_t class_dot = qualified.rfind('.');
  if (class_dot == std::string::npos) {
    out.package.clear();
    out.class_name = qualified;
  } else {
    out.package = qualified.substr(0, class_dot);
    out.class_name = qualified.substr(class_dot + 1);
  }
  if (out.class_name.empty() || out.method_name.empty()) return false;

  out.file.clear();
  out.line = 0;
  if (loc == "Native Method" || loc == "Unknown Source") return true;
  size_t colon = loc.rfind(':');
  if (colon == std::string::npos) {
    out.file = loc;
    return true;
  }
  out.file = loc.substr(0, colon);
  try {
    out.line = std::stoi(loc.substr(colon + 1));
  } catch (...) {
    return false;
  }
  if (out.line < 0) return false;
  return true;
}

}  // namespace

std::string StackFrame::qualified_class() const {
  if (package.empty()) return class_name;
  return package + "." + class_name;
}

std::string StackTrace::render() const {
  std::string out = header;
  if (!out.empty() && out.back() != '\n') out.push_back('\n');
  for (const auto& f : frames) {
    out += "\tat " + f.qualified_class() + "." + f.method_name + "(";
    if (f.file.empty()) {
      out += "Unknown Source";
    } else {
      out += f.file;
      if (f.line > 0) out += ":" + std::to_string(f.line);
    }
    out += ")\n";
  }
  return out;
}

StackTrace parse_stack_trace(const std::string& raw) {
  StackTrace trace;
  bool in_header = true;
  std::string header;
  for (const auto& line : split_lines(raw)) {
    StackFrame frame;
    if (parse_frame_line(line, frame)) {
      in_header = false;
      trace.frames.push_back(std::move(frame));
    } else if (in_header) {
      header += line;
      header.push_back('\n');
    }
    // non-frame lines after the first frame (Caused by, "... N more") dropped
  }
  if (trace.frames.empty()) {
    raise(ErrorCode::UnparsableTrace, "no stack frames found");
  }
  while (!header.empty() && header.back() == '\n') header.pop_back();
  trace.header = header;
  return trace;
}

StackTrace prune_to_project(const StackTrace& trace,
                            const std::vector<std::string>& project_prefixes) {
  if (project_prefixes.empty()) return trace;
  StackTrace out;
  out.header = trace.header;
  for (const auto& f : trace.frames) {
    const std::string qualified = f.qualified_class();
    for (const auto& prefix : project_prefixes) {
      if (qualified.rfind(prefix, 0) == 0) {
        out.frames.push_back(f);
        break;
      }
    }
  }
  return out;
}

namespace {

bool is_test_scope_class(const MethodId& candidate, const MethodId& test) {
  if (candidate.class_name == test.class_name && candidate.package == test.package) return true;
  const std::string& c = candidate.class_name;
  if (c.size() >= 4 && c.compare(c.size() - 4, 4, "Test") == 0) return true;
  if (c.size() >= 5 && c.compare(c.size() - 5, 5, "Tests") == 0) return true;
  return false;
}

void collect_helpers(const CodeGraph& graph, const MethodId& from, const MethodId& test,
                     int depth, std::set<std::string>& seen,
                     std::vector<std::string>& bodies) {
  if (depth > 3) return;
  NeighborReport nb = graph.get_call_graph(from);
  for (const auto& callee : nb.callees) {
    if (!is_test_scope_class(callee, test)) continue;
    if (callee == test) continue;
    if (!seen.insert(callee.canonical()).second) continue;
    const MethodNode& node = graph.get_method_body(callee);
    bodies.push_back(node.body);
    collect_helpers(graph, callee, test, depth + 1, seen, bodies);
  }
}

}  // namespace

PreprocessedTest preprocess_test(const CodeGraph& graph, const MethodId& test,
                                 const std::string& body, int failing_line) {
  std::vector<std::string> lines = split_lines(body);
  if (failing_line < 1 || failing_line > static_cast<int>(lines.size())) {
    raise(ErrorCode::FailingLineOutOfRange,
          test.canonical() + ": line " + std::to_string(failing_line) + " of " +
              std::to_string(lines.size()));
  }

  PreprocessedTest result;
  result.test = test;

  std::string pruned;
  int balance = 0;
  for (int i = 0; i < failing_line; ++i) {
    for (char c : lines[i]) {
      if (c == '{') ++balance;
      if (c == '}') --balance;
    }
    pruned += lines[i];
    pruned.push_back('\n');
  }
  for (; balance > 0; --balance) pruned += "}\n";
  result.pruned_body = pruned;

  if (graph.contains(test)) {
    std::set<std::string> seen;
    collect_helpers(graph, test, test, 1, seen, result.helper_bodies);
  } else {
    result.warnings.push_back("test method " + test.canonical() +
                              " not in call graph; helper extraction skipped");
  }
  return result;
}

std::optional<int> failing_line_in_test(const CodeGraph& graph, const MethodId& test,
                                        const StackTrace& pruned) {
  const MethodNode* node = graph.find(test);
  if (!node || node->start_line == 0) return std::nullopt;  // no span to map into
  for (const auto& frame : pruned.frames) {  // innermost first
    if (frame.class_name != test.class_name) continue;
    if (!frame.package.empty() && frame.package != test.package) continue;
    if (frame.line < node->start_line || frame.line > node->end_line) continue;
    return frame.line - node->start_line + 1;
  }
  return std::nullopt;
}

}  // namespace faultnav
