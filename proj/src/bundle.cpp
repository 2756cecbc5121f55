#include "faultnav/bundle.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "faultnav/errors.hpp"

namespace faultnav {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) raise(ErrorCode::IoError, "read failed: " + path);
  return buffer.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) raise(ErrorCode::IoError, "cannot create " + target.parent_path().string());
  }
  const fs::path temp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot write " + temp.string());
    out << content;
    out.flush();
    if (!out) raise(ErrorCode::IoError, "write failed: " + temp.string());
  }
  std::error_code ec;
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp, ec);
    raise(ErrorCode::IoError, "cannot replace " + path);
  }
}

namespace {

// Lines `start..end` (1-based, inclusive) of `text`, newline-terminated.
std::string slice_lines(const std::string& text, int start, int end,
                        const std::string& origin) {
  if (start < 1 || end < start) {
    raise(ErrorCode::MalformedBundle, origin + ": invalid line span");
  }
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      if (!current.empty() && current.back() == '\r') current.pop_back();
      lines.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) lines.push_back(current);
  if (end > static_cast<int>(lines.size())) {
    raise(ErrorCode::MalformedBundle,
          origin + ": span ends at line " + std::to_string(end) + " but the file has " +
              std::to_string(lines.size()) + " lines");
  }
  std::string out;
  for (int i = start - 1; i < end; ++i) out += lines[i] + "\n";
  return out;
}

std::string require_string(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_string()) {
    raise(ErrorCode::MalformedBundle, std::string("bundle.json needs a string \"") + key + "\"");
  }
  return doc[key].get<std::string>();
}

}  // namespace

FaultBundle FaultBundle::load(const std::string& bundle_dir) {
  const fs::path dir(bundle_dir);
  json doc;
  try {
    doc = json::parse(read_file((dir / "bundle.json").string()));
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedBundle, std::string("invalid bundle.json: ") + e.what());
  }
  if (!doc.is_object()) raise(ErrorCode::MalformedBundle, "bundle.json must be an object");

  FaultBundle bundle;
  bundle.dir = dir.string();
  bundle.fault_id = require_string(doc, "fault_id");

  auto path_of = [&](const std::string& rel) { return (dir / rel).string(); };

  bundle.matrix = parse_spectra(read_file(path_of(require_string(doc, "spectra"))),
                                read_file(path_of(require_string(doc, "matrix"))),
                                read_file(path_of(require_string(doc, "tests"))));
  bundle.graph = CodeGraph::load(read_file(path_of(require_string(doc, "graph"))));

  if (doc.contains("project_prefixes")) {
    if (!doc["project_prefixes"].is_array()) {
      raise(ErrorCode::MalformedBundle, "project_prefixes must be an array");
    }
    for (const auto& p : doc["project_prefixes"]) {
      bundle.project_prefixes.push_back(p.get<std::string>());
    }
  }

  if (doc.contains("test_sources")) {
    for (const auto& item : doc["test_sources"]) {
      TestSourceEntry entry;
      entry.test = MethodId::parse_test_name(item.at("test").get<std::string>());
      if (item.contains("body")) {
        entry.body = item["body"].get<std::string>();
      } else {
        entry.file = item.at("file").get<std::string>();
        entry.start_line = item.at("start_line").get<int>();
        entry.end_line = item.at("end_line").get<int>();
        // validates the span eagerly
        slice_lines(read_file(path_of(entry.file)), entry.start_line, entry.end_line,
                    entry.file);
      }
      bundle.test_sources.push_back(std::move(entry));
    }
  }

  if (doc.contains("external_scores")) {
    json scores;
    const std::string path = path_of(doc["external_scores"].get<std::string>());
    try {
      scores = json::parse(read_file(path));
    } catch (const json::exception& e) {
      raise(ErrorCode::MalformedBundle, std::string("invalid external scores: ") + e.what());
    }
    if (!scores.is_object()) {
      raise(ErrorCode::MalformedBundle, "external scores must be an object of id -> score");
    }
    std::map<MethodId, double> parsed;
    for (const auto& [key, value] : scores.items()) {
      parsed[MethodId::parse(key)] = value.get<double>();
    }
    bundle.external_scores = std::move(parsed);
  }

  if (doc.contains("mock_script")) {
    bundle.mock_script =
        MockScript::load(read_file(path_of(doc["mock_script"].get<std::string>())));
  }
  return bundle;
}

std::string FaultBundle::test_body(const MethodId& test, MethodId* resolved, int* start_line,
                                   int* end_line) const {
  *resolved = test;
  *start_line = 0;
  *end_line = 0;
  const std::string canon = test.canonical();

  for (const auto& entry : test_sources) {
    if (entry.test.canonical() != canon) continue;
    if (!entry.body.empty()) return entry.body;
    *start_line = entry.start_line;
    *end_line = entry.end_line;
    return slice_lines(read_file((fs::path(dir) / entry.file).string()), entry.start_line,
                       entry.end_line, entry.file);
  }

  if (const MethodNode* node = graph.find(test)) {
    *start_line = node->start_line;
    *end_line = node->end_line;
    return node->body;
  }

  // Test runners rarely report the parameter signature; fall back to the
  // unique graph method with the same package, class and name.
  const MethodNode* match = nullptr;
  for (const auto& node : graph.methods()) {
    if (node.id.package != test.package || node.id.class_name != test.class_name ||
        node.id.method_name != test.method_name) {
      continue;
    }
    if (match) {
      raise(ErrorCode::Precondition,
            "test " + canon + " matches multiple graph methods; supply a test_sources entry");
    }
    match = &node;
  }
  if (match) {
    *resolved = match->id;
    *start_line = match->start_line;
    *end_line = match->end_line;
    return match->body;
  }
  raise(ErrorCode::Precondition,
        "source for test " + canon + " not found in test_sources or the call graph");
}

}  // namespace faultnav
