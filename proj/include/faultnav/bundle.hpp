#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faultnav/codegraph.hpp"
#include "faultnav/llm.hpp"
#include "faultnav/spectra.hpp"

namespace faultnav {

// Where a test method's source comes from when the call graph does not
// carry it: either an inline body or a file plus 1-based line span.
struct TestSourceEntry {
  MethodId test;
  std::string file;  // relative to the bundle directory
  int start_line = 0;
  int end_line = 0;
  std::string body;  // inline alternative to file + span
};

// On-disk inputs for one fault, loaded eagerly so that a constructed bundle
// is fully parsed and internally consistent.
struct FaultBundle {
  std::string fault_id;
  std::string dir;
  CoverageMatrix matrix;
  CodeGraph graph;
  std::vector<std::string> project_prefixes;
  std::vector<TestSourceEntry> test_sources;
  std::optional<std::map<MethodId, double>> external_scores;
  std::optional<MockScript> mock_script;

  // Reads `<bundle_dir>/bundle.json`:
  //   {"fault_id": "...", "spectra": "...", "matrix": "...", "tests": "...",
  //    "graph": "...", "project_prefixes": [...],
  //    "test_sources"?: [{"test", "file", "start_line", "end_line"} |
  //                      {"test", "body"}],
  //    "external_scores"?: "<path to {\"<method id>\": score} JSON>",
  //    "mock_script"?: "<path>"}
  // All paths are relative to the bundle directory; every referenced file
  // must exist and parse. Throws MalformedBundle or IoError.
  static FaultBundle load(const std::string& bundle_dir);

  // The body and 1-based source span for `test`: explicit test_sources entry
  // first, then the call graph (exact id, then a unique match ignoring the
  // parameter signature). Returns the resolved id via `resolved`. Throws
  // Precondition when the test's source cannot be found.
  std::string test_body(const MethodId& test, MethodId* resolved, int* start_line,
                        int* end_line) const;
};

std::string read_file(const std::string& path);                // IoError on failure
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace faultnav
