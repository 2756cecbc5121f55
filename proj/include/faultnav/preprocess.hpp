#pragma once

#include <optional>
#include <string>
#include <vector>

#include "faultnav/codegraph.hpp"
#include "faultnav/method_id.hpp"

namespace faultnav {

// One `at pkg.Class.method(File.java:NN)` line from a JVM stack trace.
struct StackFrame {
  std::string package;
  std::string class_name;
  std::string method_name;
  std::string file;       // empty for "Native Method" / "Unknown Source"
  int line = 0;           // 0 = unknown

  std::string qualified_class() const;
  bool operator==(const StackFrame&) const = default;
};

struct StackTrace {
  std::string header;  // exception type + message, verbatim
  std::vector<StackFrame> frames;

  std::string render() const;
  bool operator==(const StackTrace&) const = default;
};

// Parses a raw JVM stack trace: a contiguous header of non-frame lines,
// then frames. Interleaved non-frame lines ("Caused by:", "... N more")
// are dropped. Throws UnparsableTrace when no frame is found.
StackTrace parse_stack_trace(const std::string& raw);

// Drops frames whose class is outside every project prefix. The header is
// kept. An empty prefix list keeps everything.
StackTrace prune_to_project(const StackTrace& trace,
                            const std::vector<std::string>& project_prefixes);

struct PreprocessedTest {
  MethodId test;
  std::string pruned_body;          // statements after the failing line removed
  std::vector<std::string> helper_bodies;  // bodies of in-test-scope callees
  std::vector<std::string> warnings;
};

// Cuts the test body after `failing_line` (1-based within the body), repairs
// brace balance, and pulls in bodies of helper methods the test calls
// (helpers = callees in the test's own class or a *Test/*Tests class,
// transitively up to depth 3). Throws FailingLineOutOfRange.
PreprocessedTest preprocess_test(const CodeGraph& graph, const MethodId& test,
                                 const std::string& body, int failing_line);

// Picks the failing line for `test` from a pruned trace: the innermost frame
// declared in the test's class whose line falls inside the test's span
// (any line when the span is unknown). Returns the 1-based line relative to
// the body start, or nullopt when no frame matches.
std::optional<int> failing_line_in_test(const CodeGraph& graph, const MethodId& test,
                                        const StackTrace& pruned);

}  // namespace faultnav
