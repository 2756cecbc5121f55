#pragma once

#include <optional>
#include <string>
#include <vector>

#include "faultnav/method_id.hpp"

namespace faultnav {

struct MethodNode {
  MethodId id;
  std::string file;
  int start_line = 0;  // 0 = unknown
  int end_line = 0;
  std::string body;

  bool operator==(const MethodNode&) const = default;
};

struct NeighborReport {
  MethodId method;
  std::vector<MethodId> callers;
  std::vector<MethodId> callees;
};

// Inter-procedural call graph with method bodies. Built offline by external
// tooling and ingested from JSON; immutable after load, queries are
// read-only and thread-safe.
class CodeGraph {
 public:
  // `{"methods":[{"id","file","start_line","end_line","body"}...],
  //  "edges":[[caller_idx,callee_idx]...]}`. Duplicate edges are collapsed,
  // body line endings are normalized to '\n'. Throws MalformedGraph,
  // DanglingEdge or DuplicateMethod.
  static CodeGraph load(const std::string& graph_text);

  std::string serialize() const;

  size_t size() const { return methods_.size(); }
  const std::vector<MethodNode>& methods() const { return methods_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  bool contains(const MethodId& id) const;
  const MethodNode* find(const MethodId& id) const;

  // Exact-match body lookup; throws MethodNotFound for ids outside the graph.
  const MethodNode& get_method_body(const MethodId& id) const;

  // Callers and callees of `id`, each list duplicate-free and sorted by
  // MethodId order. Throws MethodNotFound.
  NeighborReport get_call_graph(const MethodId& id) const;

  bool operator==(const CodeGraph& other) const {
    return methods_ == other.methods_ && edges_ == other.edges_;
  }

 private:
  std::vector<MethodNode> methods_;
  std::vector<std::pair<int, int>> edges_;  // (caller index, callee index)
};

}  // namespace faultnav
