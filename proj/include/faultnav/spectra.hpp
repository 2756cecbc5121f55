#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faultnav/method_id.hpp"

namespace faultnav {

enum class TestOutcome { Pass, Fail };

struct TestRecord {
  std::string name;
  TestOutcome outcome = TestOutcome::Pass;
  std::optional<std::string> stack_trace;

  bool operator==(const TestRecord&) const = default;
};

// One covered method. `statements` holds the source line numbers of the
// statement rows that were aggregated into this entry ({0} for input that was
// already method-level). `covered_by[t]` is true iff test t executed any of
// the method's statements.
struct CoverageEntry {
  MethodId method;
  std::set<int> statements;
  std::vector<bool> covered_by;

  bool operator==(const CoverageEntry&) const = default;
};

// Per-test by per-method execution bits plus verdicts. Entry order is the
// first-appearance (execution) order of the spectra file. Immutable after
// construction.
struct CoverageMatrix {
  std::vector<TestRecord> tests;
  std::vector<CoverageEntry> entries;

  int failing_count() const;
  int passing_count() const;

  bool operator==(const CoverageMatrix&) const = default;
};

struct SuspiciousnessScore {
  MethodId method;
  double score = 0.0;
  int e_f = 0;
  int e_p = 0;
  int n_f = 0;
  int n_p = 0;
};

enum class OrderStrategy { Execution, Ochiai, External };

OrderStrategy order_strategy_from_name(const std::string& name);
std::string order_strategy_name(OrderStrategy s);

// Parses the three GZoltar-style files:
//  - spectra: one element per line, `pkg$Class#method(sig)` optionally
//    suffixed `:lineno`; an optional single header line `name` is skipped.
//  - matrix: one row per test, space-separated 0/1 bits, final `+` or `-`.
//  - tests: one row per test, `name,outcome[,runtime[,stacktrace]]`; the
//    stack-trace field may be double-quoted with `\n` escapes.
// Statement rows are aggregated to method level; methods covered by no test
// are dropped. Throws MalformedLine, DimensionMismatch or NoFailingTest.
CoverageMatrix parse_spectra(const std::string& spectra_text,
                             const std::string& matrix_text,
                             const std::string& tests_text);

// Serializers for the same three formats; parse_spectra on the output
// reconstructs an equal CoverageMatrix.
std::string serialize_spectra(const CoverageMatrix& matrix);
std::string serialize_matrix(const CoverageMatrix& matrix);
std::string serialize_tests(const CoverageMatrix& matrix);

// Ochiai suspiciousness: e_f / sqrt((e_f + n_f) * (e_f + e_p)); a zero
// denominator (or e_f = 0) yields 0. Output is sorted by descending score,
// ties broken by MethodId canonical order.
std::vector<SuspiciousnessScore> ochiai(const CoverageMatrix& matrix);

// Orders the matrix methods by the chosen strategy. `external` sorts by the
// supplied scores (descending, ties by MethodId order) and appends unscored
// methods in execution order.
std::vector<MethodId> rank_by(
    const CoverageMatrix& matrix, OrderStrategy strategy,
    const std::map<MethodId, double>* external_scores = nullptr);

}  // namespace faultnav
