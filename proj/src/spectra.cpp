#include "faultnav/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "faultnav/errors.hpp"

namespace faultnav {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
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
  // trailing blank lines are not rows
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

struct SpectraElement {
  MethodId method;
  int line = 0;  // 0 = method-level (no statement suffix)
};

SpectraElement parse_spectra_line(const std::string& line) {
  SpectraElement el;
  auto close = line.rfind(')');
  if (close == std::string::npos)
    raise(ErrorCode::MalformedLine, "spectra element missing ')': " + line);
  std::string id_part = line.substr(0, close + 1);
  std::string rest = line.substr(close + 1);
  if (!rest.empty()) {
    if (rest[0] != ':' || rest.size() < 2)
      raise(ErrorCode::MalformedLine, "bad statement suffix: " + line);
    try {
      el.line = std::stoi(rest.substr(1));
    } catch (const std::exception&) {
      raise(ErrorCode::MalformedLine, "bad statement line number: " + line);
    }
    if (el.line <= 0)
      raise(ErrorCode::MalformedLine, "statement line must be positive: " + line);
  }
  el.method = MethodId::parse(id_part);
  return el;
}

std::string unescape_trace(std::string field) {
  if (field.size() >= 2 && field.front() == '"' && field.back() == '"')
    field = field.substr(1, field.size() - 2);
  std::string out;
  out.reserve(field.size());
  for (size_t i = 0; i < field.size(); ++i) {
    if (field[i] == '\\' && i + 1 < field.size() && field[i + 1] == 'n') {
      out.push_back('\n');
      ++i;
    } else if (field[i] == '"' && i + 1 < field.size() && field[i + 1] == '"') {
      out.push_back('"');
      ++i;
    } else {
      out.push_back(field[i]);
    }
  }
  return out;
}

std::string escape_trace(const std::string& trace) {
  std::string out = "\"";
  for (char c : trace) {
    if (c == '\n')
      out += "\\n";
    else if (c == '"')
      out += "\"\"";
    else
      out.push_back(c);
  }
  out += "\"";
  return out;
}

TestRecord parse_test_line(const std::string& line) {
  TestRecord rec;
  auto c1 = line.find(',');
  if (c1 == std::string::npos)
    raise(ErrorCode::MalformedLine, "tests row needs name,outcome: " + line);
  rec.name = line.substr(0, c1);
  auto c2 = line.find(',', c1 + 1);
  std::string outcome = line.substr(c1 + 1, c2 == std::string::npos
                                                ? std::string::npos
                                                : c2 - c1 - 1);
  std::string lowered;
  for (char c : outcome) lowered.push_back(static_cast<char>(std::tolower(c)));
  if (lowered == "pass" || lowered == "true")
    rec.outcome = TestOutcome::Pass;
  else if (lowered == "fail" || lowered == "false")
    rec.outcome = TestOutcome::Fail;
  else
    raise(ErrorCode::MalformedLine, "unknown outcome '" + outcome + "' in: " + line);

  if (c2 != std::string::npos) {
    // optional runtime, then optional stack trace (which may itself hold commas)
    std::string rest = line.substr(c2 + 1);
    std::string trace_field;
    if (!rest.empty() && rest[0] == '"') {
      trace_field = rest;  // quoted trace, no runtime
    } else {
      auto c3 = rest.find(',');
      if (c3 == std::string::npos) {
        // a bare number is a runtime; anything else is a trace
        bool numeric = !rest.empty() &&
                       rest.find_first_not_of("0123456789.") == std::string::npos;
        if (!numeric) trace_field = rest;
      } else {
        trace_field = rest.substr(c3 + 1);
      }
    }
    if (!trace_field.empty()) rec.stack_trace = unescape_trace(trace_field);
  }
  return rec;
}

}  // namespace

int CoverageMatrix::failing_count() const {
  return static_cast<int>(std::count_if(
      tests.begin(), tests.end(),
      [](const TestRecord& t) { return t.outcome == TestOutcome::Fail; }));
}

int CoverageMatrix::passing_count() const {
  return static_cast<int>(tests.size()) - failing_count();
}

OrderStrategy order_strategy_from_name(const std::string& name) {
  if (name == "execution") return OrderStrategy::Execution;
  if (name == "ochiai") return OrderStrategy::Ochiai;
  if (name == "external") return OrderStrategy::External;
  raise(ErrorCode::InvalidConfig, "unknown order strategy: " + name);
}

std::string order_strategy_name(OrderStrategy s) {
  switch (s) {
    case OrderStrategy::Execution: return "execution";
    case OrderStrategy::Ochiai: return "ochiai";
    case OrderStrategy::External: return "external";
  }
  return "?";
}

CoverageMatrix parse_spectra(const std::string& spectra_text,
                             const std::string& matrix_text,
                             const std::string& tests_text) {
  std::vector<std::string> spectra_lines = split_lines(spectra_text);
  if (!spectra_lines.empty() && spectra_lines.front() == "name")
    spectra_lines.erase(spectra_lines.begin());

  std::vector<SpectraElement> elements;
  elements.reserve(spectra_lines.size());
  for (const auto& line : spectra_lines) {
    if (line.empty())
      raise(ErrorCode::MalformedLine, "empty spectra row");
    elements.push_back(parse_spectra_line(line));
  }

  std::vector<std::string> test_lines = split_lines(tests_text);
  if (!test_lines.empty() && test_lines.front() == "name,outcome")
    test_lines.erase(test_lines.begin());

  CoverageMatrix matrix;
  for (const auto& line : test_lines) matrix.tests.push_back(parse_test_line(line));

  std::vector<std::string> matrix_rows = split_lines(matrix_text);
  if (matrix_rows.size() != matrix.tests.size())
    raise(ErrorCode::DimensionMismatch,
          "matrix has " + std::to_string(matrix_rows.size()) + " rows but tests file has " +
              std::to_string(matrix.tests.size()));

  // element coverage bits, row-major over tests
  std::vector<std::vector<bool>> bits(elements.size(),
                                      std::vector<bool>(matrix.tests.size(), false));
  for (size_t row = 0; row < matrix_rows.size(); ++row) {
    std::istringstream in(matrix_rows[row]);
    std::string tok;
    std::vector<std::string> tokens;
    while (in >> tok) tokens.push_back(tok);
    if (tokens.empty())
      raise(ErrorCode::MalformedLine, "empty matrix row " + std::to_string(row + 1));
    std::string verdict = tokens.back();
    tokens.pop_back();
    if (verdict != "+" && verdict != "-")
      raise(ErrorCode::MalformedLine,
            "matrix row " + std::to_string(row + 1) + " must end with + or -");
    if (tokens.size() != elements.size())
      raise(ErrorCode::DimensionMismatch,
            "matrix row " + std::to_string(row + 1) + " has " +
                std::to_string(tokens.size()) + " bits for " +
                std::to_string(elements.size()) + " spectra elements");
    TestOutcome from_matrix = verdict == "+" ? TestOutcome::Pass : TestOutcome::Fail;
    if (from_matrix != matrix.tests[row].outcome)
      raise(ErrorCode::MalformedLine,
            "matrix verdict disagrees with tests file on row " + std::to_string(row + 1));
    for (size_t col = 0; col < tokens.size(); ++col) {
      if (tokens[col] == "1")
        bits[col][row] = true;
      else if (tokens[col] != "0")
        raise(ErrorCode::MalformedLine,
              "matrix token '" + tokens[col] + "' in row " + std::to_string(row + 1));
    }
  }

  // aggregate statement rows to method level, preserving first-appearance order
  std::unordered_map<std::string, size_t> index_of;
  for (size_t i = 0; i < elements.size(); ++i) {
    const std::string key = elements[i].method.canonical();
    auto it = index_of.find(key);
    size_t entry_idx;
    if (it == index_of.end()) {
      entry_idx = matrix.entries.size();
      index_of.emplace(key, entry_idx);
      CoverageEntry entry;
      entry.method = elements[i].method;
      entry.covered_by.assign(matrix.tests.size(), false);
      matrix.entries.push_back(std::move(entry));
    } else {
      entry_idx = it->second;
    }
    CoverageEntry& entry = matrix.entries[entry_idx];
    entry.statements.insert(elements[i].line);
    for (size_t t = 0; t < matrix.tests.size(); ++t)
      if (bits[i][t]) entry.covered_by[t] = true;
  }

  // drop methods covered by no test
  std::erase_if(matrix.entries, [](const CoverageEntry& e) {
    return std::none_of(e.covered_by.begin(), e.covered_by.end(),
                        [](bool b) { return b; });
  });

  if (matrix.failing_count() == 0)
    raise(ErrorCode::NoFailingTest, "coverage matrix has no failing test");
  return matrix;
}

std::string serialize_spectra(const CoverageMatrix& matrix) {
  std::string out = "name\n";
  for (const auto& entry : matrix.entries) {
    for (int line : entry.statements) {
      out += entry.method.canonical();
      if (line != 0) out += ":" + std::to_string(line);
      out += "\n";
    }
  }
  return out;
}

std::string serialize_matrix(const CoverageMatrix& matrix) {
  std::string out;
  for (size_t t = 0; t < matrix.tests.size(); ++t) {
    for (const auto& entry : matrix.entries) {
      for (size_t s = 0; s < entry.statements.size(); ++s) {
        out += entry.covered_by[t] ? "1 " : "0 ";
      }
    }
    out += matrix.tests[t].outcome == TestOutcome::Pass ? "+" : "-";
    out += "\n";
  }
  return out;
}

std::string serialize_tests(const CoverageMatrix& matrix) {
  std::string out = "name,outcome\n";
  for (const auto& t : matrix.tests) {
    out += t.name;
    out += t.outcome == TestOutcome::Pass ? ",PASS" : ",FAIL";
    if (t.stack_trace) out += "," + escape_trace(*t.stack_trace);
    out += "\n";
  }
  return out;
}

std::vector<SuspiciousnessScore> ochiai(const CoverageMatrix& matrix) {
  const int total_fail = matrix.failing_count();
  const int total_pass = matrix.passing_count();

  std::vector<SuspiciousnessScore> scores;
  scores.reserve(matrix.entries.size());
  for (const auto& entry : matrix.entries) {
    SuspiciousnessScore s;
    s.method = entry.method;
    for (size_t t = 0; t < matrix.tests.size(); ++t) {
      if (!entry.covered_by[t]) continue;
      if (matrix.tests[t].outcome == TestOutcome::Fail)
        ++s.e_f;
      else
        ++s.e_p;
    }
    s.n_f = total_fail - s.e_f;
    s.n_p = total_pass - s.e_p;
    double denom =
        std::sqrt(static_cast<double>(s.e_f + s.n_f) * static_cast<double>(s.e_f + s.e_p));
    s.score = (s.e_f == 0 || denom == 0.0) ? 0.0 : s.e_f / denom;
    scores.push_back(std::move(s));
  }

  std::sort(scores.begin(), scores.end(),
            [](const SuspiciousnessScore& a, const SuspiciousnessScore& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.method.canonical() < b.method.canonical();
            });
  return scores;
}

std::vector<MethodId> rank_by(const CoverageMatrix& matrix, OrderStrategy strategy,
                              const std::map<MethodId, double>* external_scores) {
  std::vector<MethodId> order;
  order.reserve(matrix.entries.size());

  switch (strategy) {
    case OrderStrategy::Execution:
      for (const auto& entry : matrix.entries) order.push_back(entry.method);
      return order;

    case OrderStrategy::Ochiai:
      for (const auto& s : ochiai(matrix)) order.push_back(s.method);
      return order;

    case OrderStrategy::External: {
      if (external_scores == nullptr)
        raise(ErrorCode::EmptyExternalScores, "external strategy needs a score map");
      std::vector<std::pair<MethodId, double>> scored;
      std::vector<MethodId> unscored;
      for (const auto& entry : matrix.entries) {
        auto it = external_scores->find(entry.method);
        if (it != external_scores->end())
          scored.emplace_back(entry.method, it->second);
        else
          unscored.push_back(entry.method);
      }
      if (scored.empty())
        raise(ErrorCode::EmptyExternalScores,
              "external scores cover no method in the matrix");
      std::sort(scored.begin(), scored.end(),
                [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first.canonical() < b.first.canonical();
                });
      for (auto& [id, score] : scored) order.push_back(std::move(id));
      for (auto& id : unscored) order.push_back(std::move(id));
      return order;
    }
  }
  return order;
}

}  // namespace faultnav
