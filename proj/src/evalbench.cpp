#include "faultnav/evalbench.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "faultnav/bundle.hpp"
#include "faultnav/errors.hpp"

namespace faultnav {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<GroundTruth> parse_ground_truth(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, std::string("invalid ground truth JSON: ") + e.what());
  }
  if (!doc.is_array()) raise(ErrorCode::IoError, "ground truth must be a JSON array");
  std::vector<GroundTruth> truth;
  try {
    for (const auto& item : doc) {
      GroundTruth gt;
      gt.fault_id = item.at("fault_id").get<std::string>();
      for (const auto& m : item.at("faulty_methods")) {
        gt.faulty_methods.push_back(MethodId::parse(m.get<std::string>()));
      }
      if (gt.faulty_methods.empty()) {
        raise(ErrorCode::IoError, gt.fault_id + ": faulty_methods must be non-empty");
      }
      truth.push_back(std::move(gt));
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, std::string("bad ground truth entry: ") + e.what());
  }
  return truth;
}

std::string serialize_ground_truth(const std::vector<GroundTruth>& truth) {
  json doc = json::array();
  for (const auto& gt : truth) {
    json methods = json::array();
    for (const auto& m : gt.faulty_methods) methods.push_back(m.canonical());
    doc.push_back({{"fault_id", gt.fault_id}, {"faulty_methods", std::move(methods)}});
  }
  return doc.dump(2) + "\n";
}

RankingFile RankingFile::parse(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, std::string("invalid ranking JSON: ") + e.what());
  }
  RankingFile file;
  try {
    file.fault_id = doc.at("fault_id").get<std::string>();
    file.ranking.stage = doc.value("stage", "final");
    int expected_rank = 1;
    for (const auto& item : doc.at("ranking")) {
      RankedEntry entry;
      entry.method = MethodId::parse(item.at("method").get<std::string>());
      entry.ordinal_rank = item.value("rank", expected_rank);
      entry.reasoning = item.value("reasoning", "");
      if (item.contains("fix") && item["fix"].is_string()) {
        entry.fix = item["fix"].get<std::string>();
      }
      ++expected_rank;
      file.ranking.entries.push_back(std::move(entry));
    }
    if (doc.contains("config")) file.config_json = doc["config"].dump();
    if (doc.contains("stats")) file.stats_json = doc["stats"].dump();
  } catch (const json::exception& e) {
    raise(ErrorCode::IoError, std::string("bad ranking file shape: ") + e.what());
  }
  return file;
}

std::string RankingFile::serialize() const {
  json entries = json::array();
  for (const auto& e : ranking.entries) {
    json je{{"rank", e.ordinal_rank},
            {"method", e.method.canonical()},
            {"reasoning", e.reasoning}};
    je["fix"] = e.fix ? json(*e.fix) : json(nullptr);
    entries.push_back(std::move(je));
  }
  json doc{{"fault_id", fault_id},
           {"stage", ranking.stage},
           {"ranking", std::move(entries)},
           {"config", json::parse(config_json)},
           {"stats", json::parse(stats_json)}};
  return doc.dump(2) + "\n";
}

TopNReport top_n(const std::map<std::string, RankedList>& rankings,
                 const std::vector<GroundTruth>& truth) {
  TopNReport report;
  for (int n : kTopNValues) report.counts[n] = 0;
  for (const auto& gt : truth) {
    auto it = rankings.find(gt.fault_id);
    if (it == rankings.end()) {
      report.warnings.push_back("no ranking for fault " + gt.fault_id + "; counted as a miss");
      report.per_fault[gt.fault_id] = std::nullopt;
      continue;
    }
    std::optional<int> best;
    for (const auto& faulty : gt.faulty_methods) {
      const std::string canon = faulty.canonical();
      for (const auto& entry : it->second.entries) {
        if (entry.method.canonical() != canon) continue;
        if (!best || entry.ordinal_rank < *best) best = entry.ordinal_rank;
      }
    }
    report.per_fault[gt.fault_id] = best;
    if (best) {
      for (int n : kTopNValues) {
        if (*best <= n) ++report.counts[n];
      }
    }
  }
  return report;
}

std::string report_to_json(const TopNReport& report) {
  json per_fault = json::object();
  for (const auto& [fault, rank] : report.per_fault) {
    per_fault[fault] = rank ? json(*rank) : json(nullptr);
  }
  json counts = json::object();
  for (const auto& [n, count] : report.counts) counts[std::to_string(n)] = count;
  json doc{{"top_n", std::move(counts)},
           {"per_fault", std::move(per_fault)},
           {"warnings", report.warnings}};
  return doc.dump(2) + "\n";
}

std::string report_to_text(const TopNReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "fault" << "best rank\n";
  for (const auto& [fault, rank] : report.per_fault) {
    out << std::left << std::setw(28) << fault;
    if (rank) {
      out << *rank;
    } else {
      out << "-";
    }
    out << "\n";
  }
  out << "\n";
  for (int n : kTopNValues) {
    out << "Top-" << n << ": " << report.counts.at(n) << "\n";
  }
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  return out.str();
}

namespace {

std::string format_delta(int value, int baseline) {
  if (baseline == 0) return "(n/a)";
  const double delta = (static_cast<double>(value) - baseline) / baseline * 100.0;
  std::ostringstream out;
  out << "(" << std::showpos << std::fixed << std::setprecision(2) << delta << "%)";
  return out.str();
}

}  // namespace

std::string ExperimentTable::to_json() const {
  json doc;
  doc["fault_count"] = fault_count;
  doc["rows"] = json::array();
  const ExperimentRow* baseline = rows.empty() ? nullptr : &rows.front();
  for (const auto& row : rows) {
    json counts = json::object();
    json deltas = json::object();
    for (const auto& [n, count] : row.report.counts) {
      counts[std::to_string(n)] = count;
      if (baseline && &row != baseline) {
        const int base = baseline->report.counts.at(n);
        deltas[std::to_string(n)] =
            base == 0 ? json(nullptr)
                      : json((static_cast<double>(count) - base) / base * 100.0);
      }
    }
    json jrow{{"label", row.label}, {"top_n", std::move(counts)}};
    if (baseline && &row != baseline) jrow["delta_pct"] = std::move(deltas);
    if (!row.failures.empty()) {
      json failures = json::object();
      for (const auto& [fault, message] : row.failures) failures[fault] = message;
      jrow["failures"] = std::move(failures);
    }
    jrow["warnings"] = row.report.warnings;
    doc["rows"].push_back(std::move(jrow));
  }
  return doc.dump(2) + "\n";
}

std::string ExperimentTable::to_text() const {
  std::ostringstream out;
  out << std::left << std::setw(24) << "config";
  for (int n : kTopNValues) {
    out << std::left << std::setw(18) << ("Top-" + std::to_string(n));
  }
  out << "\n";
  const ExperimentRow* baseline = rows.empty() ? nullptr : &rows.front();
  for (const auto& row : rows) {
    out << std::left << std::setw(24) << row.label;
    for (int n : kTopNValues) {
      const int count = row.report.counts.at(n);
      std::string cell = std::to_string(count);
      if (baseline && &row != baseline) {
        cell += " " + format_delta(count, baseline->report.counts.at(n));
      }
      out << std::left << std::setw(18) << cell;
    }
    out << "\n";
    for (const auto& [fault, message] : row.failures) {
      out << "  failed " << fault << ": " << message << "\n";
    }
  }
  return out.str();
}

ExperimentTable run_experiment(const std::string& corpus_dir,
                               const std::vector<ExperimentConfig>& configs,
                               const BackendFactory& factory) {
  std::vector<std::string> bundle_dirs;
  for (const auto& entry : fs::directory_iterator(corpus_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "bundle.json")) {
      bundle_dirs.push_back(entry.path().string());
    }
  }
  std::sort(bundle_dirs.begin(), bundle_dirs.end());

  std::vector<GroundTruth> truth =
      parse_ground_truth(read_file((fs::path(corpus_dir) / "truth.json").string()));

  ExperimentTable table;
  table.fault_count = static_cast<int>(bundle_dirs.size());
  for (const auto& config : configs) {
    ExperimentRow row;
    row.label = config.label;
    std::map<std::string, RankedList> rankings;
    for (const auto& dir : bundle_dirs) {
      std::string fault_id = fs::path(dir).filename().string();
      try {
        FaultBundle bundle = FaultBundle::load(dir);
        fault_id = bundle.fault_id;
        auto backend = factory(bundle, config.config);
        LocalizationResult result = localize(bundle, config.config, *backend);
        rankings[result.fault_id] = result.final_ranking;
      } catch (const std::exception& e) {
        row.failures[fault_id] = e.what();
      }
    }
    row.report = top_n(rankings, truth);
    table.rows.push_back(std::move(row));
  }
  return table;
}

TopNReport evaluate_rankings(const std::string& rankings_dir, const std::string& truth_file) {
  std::vector<GroundTruth> truth = parse_ground_truth(read_file(truth_file));
  std::map<std::string, RankedList> rankings;
  std::vector<std::string> warnings;
  if (!fs::is_directory(rankings_dir)) {
    raise(ErrorCode::IoError, "not a directory: " + rankings_dir);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(rankings_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    } else if (entry.is_directory() && fs::exists(entry.path() / "ranking.json")) {
      files.push_back(entry.path() / "ranking.json");
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    try {
      RankingFile file = RankingFile::parse(read_file(path.string()));
      if (rankings.count(file.fault_id)) {
        warnings.push_back("duplicate ranking for fault " + file.fault_id + "; keeping the first");
        continue;
      }
      rankings[file.fault_id] = file.ranking;
    } catch (const std::exception& e) {  // bad JSON shapes surface as json exceptions
      warnings.push_back(std::string("skipped ") + path.string() + ": " + e.what());
    }
  }
  if (rankings.empty()) warnings.push_back("no ranking files found in " + rankings_dir);
  TopNReport report = top_n(rankings, truth);
  report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
  return report;
}

}  // namespace faultnav
