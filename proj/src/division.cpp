#include "faultnav/division.hpp"

#include "faultnav/errors.hpp"

namespace faultnav {

int heuristic_token_count(const std::string& text) {
  return static_cast<int>((text.size() + 3) / 4);
}

TokenCounterRegistry::TokenCounterRegistry() {
  counters_["heuristic"] = heuristic_token_count;
}

TokenCounterRegistry& default_token_counters() {
  static TokenCounterRegistry registry;
  return registry;
}

void TokenCounterRegistry::register_counter(const std::string& name, TokenCounter counter) {
  counters_[name] = std::move(counter);
}

const TokenCounter& TokenCounterRegistry::get(const std::string& name) const {
  auto it = counters_.find(name);
  if (it == counters_.end()) raise(ErrorCode::UnknownCounter, name);
  return it->second;
}

std::vector<std::string> TokenCounterRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, fn] : counters_) out.push_back(name);
  return out;
}

DivisionPlan divide(const std::vector<DivisionInput>& entries, int token_limit,
                    int overhead_tokens) {
  if (token_limit <= 0) raise(ErrorCode::InvalidConfig, "token limit must be positive");
  const long long budget = static_cast<long long>(token_limit) - overhead_tokens;
  if (budget <= 0) {
    raise(ErrorCode::InvalidConfig, "prompt overhead leaves no room for methods");
  }

  DivisionPlan plan;
  long long current = 0;
  for (const auto& entry : entries) {
    if (entry.tokens > budget) {
      raise(ErrorCode::EntryExceedsBudget,
            entry.method.canonical() + " needs " + std::to_string(entry.tokens) +
                " tokens, budget is " + std::to_string(budget));
    }
    if (plan.groups.empty() || current + entry.tokens > budget) {
      plan.groups.emplace_back();
      plan.per_group_tokens.push_back(0);
      current = 0;
    }
    plan.groups.back().push_back(entry.method);
    plan.per_group_tokens.back() += entry.tokens;
    current += entry.tokens;
  }
  return plan;
}

}  // namespace faultnav
