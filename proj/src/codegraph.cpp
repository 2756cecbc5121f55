#include "faultnav/codegraph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "faultnav/errors.hpp"

namespace faultnav {

namespace {

using nlohmann::json;

std::string normalize_newlines(std::string text) {
  std::string out;
  out.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      out.push_back('\n');
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

// "a\nb" and "a\nb\n" are both 2 lines; only the empty string is 0.
int count_lines(const std::string& body) {
  if (body.empty()) return 0;
  int lines = 1;
  for (size_t i = 0; i + 1 < body.size(); ++i) {
    if (body[i] == '\n') ++lines;
  }
  if (body.back() == '\n') return lines;  // trailing newline ends the last line
  return lines;
}

}  // namespace

CodeGraph CodeGraph::load(const std::string& graph_text) {
  json doc;
  try {
    doc = json::parse(graph_text);
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedGraph, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("methods") || !doc["methods"].is_array()) {
    raise(ErrorCode::MalformedGraph, "top level must be an object with a \"methods\" array");
  }

  CodeGraph g;
  std::unordered_map<std::string, size_t> seen;
  for (const auto& m : doc["methods"]) {
    if (!m.is_object() || !m.contains("id") || !m["id"].is_string()) {
      raise(ErrorCode::MalformedGraph, "method entry without string \"id\"");
    }
    MethodNode node;
    node.id = MethodId::parse(m["id"].get<std::string>());
    if (m.contains("file")) node.file = m["file"].get<std::string>();
    if (m.contains("start_line")) node.start_line = m["start_line"].get<int>();
    if (m.contains("end_line")) node.end_line = m["end_line"].get<int>();
    if (m.contains("body")) node.body = normalize_newlines(m["body"].get<std::string>());

    const std::string canon = node.id.canonical();
    if (seen.count(canon)) {
      raise(ErrorCode::DuplicateMethod, canon);
    }
    if ((node.start_line == 0) != (node.end_line == 0)) {
      raise(ErrorCode::MalformedGraph, canon + ": partial line span");
    }
    if (node.start_line != 0) {
      if (node.start_line < 0 || node.end_line < node.start_line) {
        raise(ErrorCode::MalformedGraph, canon + ": invalid line span");
      }
      const int expected = node.end_line - node.start_line + 1;
      const int actual = count_lines(node.body);
      if (actual != expected) {
        raise(ErrorCode::MalformedGraph,
              canon + ": body has " + std::to_string(actual) + " lines, span declares " +
                  std::to_string(expected));
      }
    }
    seen.emplace(canon, g.methods_.size());
    g.methods_.push_back(std::move(node));
  }

  std::set<std::pair<int, int>> dedup;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) {
      raise(ErrorCode::MalformedGraph, "\"edges\" must be an array");
    }
    const int n = static_cast<int>(g.methods_.size());
    for (const auto& e : doc["edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer()) {
        raise(ErrorCode::MalformedGraph, "edge entries must be [caller, callee] index pairs");
      }
      const int from = e[0].get<int>();
      const int to = e[1].get<int>();
      if (from < 0 || from >= n || to < 0 || to >= n) {
        raise(ErrorCode::DanglingEdge,
              "[" + std::to_string(from) + ", " + std::to_string(to) + "]");
      }
      dedup.emplace(from, to);
    }
  }
  g.edges_.assign(dedup.begin(), dedup.end());
  return g;
}

std::string CodeGraph::serialize() const {
  json doc;
  doc["methods"] = json::array();
  for (const auto& m : methods_) {
    json jm;
    jm["id"] = m.id.canonical();
    jm["file"] = m.file;
    if (m.start_line != 0) {
      jm["start_line"] = m.start_line;
      jm["end_line"] = m.end_line;
    }
    jm["body"] = m.body;
    doc["methods"].push_back(std::move(jm));
  }
  doc["edges"] = json::array();
  for (const auto& [from, to] : edges_) {
    doc["edges"].push_back(json::array({from, to}));
  }
  return doc.dump(2) + "\n";
}

bool CodeGraph::contains(const MethodId& id) const { return find(id) != nullptr; }

const MethodNode* CodeGraph::find(const MethodId& id) const {
  const std::string canon = id.canonical();
  for (const auto& m : methods_) {
    if (m.id.canonical() == canon) return &m;
  }
  return nullptr;
}

const MethodNode& CodeGraph::get_method_body(const MethodId& id) const {
  const MethodNode* node = find(id);
  if (!node) raise(ErrorCode::MethodNotFound, id.canonical());
  return *node;
}

NeighborReport CodeGraph::get_call_graph(const MethodId& id) const {
  const MethodNode* node = find(id);
  if (!node) raise(ErrorCode::MethodNotFound, id.canonical());
  const int idx = static_cast<int>(node - methods_.data());

  NeighborReport report;
  report.method = node->id;
  std::set<MethodId> callers, callees;
  for (const auto& [from, to] : edges_) {
    if (to == idx) callers.insert(methods_[from].id);
    if (from == idx) callees.insert(methods_[to].id);
  }
  report.callers.assign(callers.begin(), callers.end());
  report.callees.assign(callees.begin(), callees.end());
  return report;
}

}  // namespace faultnav
