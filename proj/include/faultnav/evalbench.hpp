#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faultnav/agents.hpp"

namespace faultnav {

struct GroundTruth {
  std::string fault_id;
  std::vector<MethodId> faulty_methods;  // non-empty

  bool operator==(const GroundTruth&) const = default;
};

// Truth file: `[{"fault_id": "...", "faulty_methods": ["<id>", ...]}, ...]`.
std::vector<GroundTruth> parse_ground_truth(const std::string& json_text);
std::string serialize_ground_truth(const std::vector<GroundTruth>& truth);

// One ranking output file; config and stats blocks are kept verbatim so a
// parsed file can be re-emitted unchanged.
struct RankingFile {
  std::string fault_id;
  RankedList ranking;
  std::string config_json = "{}";
  std::string stats_json = "{}";

  static RankingFile parse(const std::string& json_text);
  std::string serialize() const;
};

struct TopNReport {
  std::map<std::string, std::optional<int>> per_fault;  // best faulty-method rank
  std::map<int, int> counts;                            // N in {1, 3, 5, 10}
  std::vector<std::string> warnings;
};

inline constexpr int kTopNValues[] = {1, 3, 5, 10};

// A fault counts toward Top-N iff the smallest rank over its faulty methods
// is <= N; truth entries without a ranking are misses, with a warning.
TopNReport top_n(const std::map<std::string, RankedList>& rankings,
                 const std::vector<GroundTruth>& truth);

std::string report_to_json(const TopNReport& report);
std::string report_to_text(const TopNReport& report);

struct ExperimentConfig {
  std::string label;
  PipelineConfig config;
};

struct ExperimentRow {
  std::string label;
  TopNReport report;
  std::map<std::string, std::string> failures;  // fault id -> error message
};

// Rows of Top-N results; the first row is the baseline the other rows'
// percentage deltas are computed against: (row - baseline) / baseline * 100.
struct ExperimentTable {
  std::vector<ExperimentRow> rows;
  int fault_count = 0;

  std::string to_json() const;
  std::string to_text() const;
};

using BackendFactory =
    std::function<std::unique_ptr<Backend>(const FaultBundle&, const PipelineConfig&)>;

// Runs every config over every bundle under `corpus_dir` (one bundle per
// subdirectory, ground truth in `truth.json` at the top). Per-fault failures
// are recorded in the row and the run continues.
ExperimentTable run_experiment(const std::string& corpus_dir,
                               const std::vector<ExperimentConfig>& configs,
                               const BackendFactory& factory);

// Top-N over ranking files on disk: `<dir>/*.json` plus
// `<dir>/*/ranking.json`, scored against the truth file.
TopNReport evaluate_rankings(const std::string& rankings_dir, const std::string& truth_file);

}  // namespace faultnav
