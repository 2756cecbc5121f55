#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "faultnav/method_id.hpp"

namespace faultnav {

using TokenCounter = std::function<int(const std::string&)>;

// Named token counters. "heuristic" (ceil(chars / 4)) is always registered.
class TokenCounterRegistry {
 public:
  TokenCounterRegistry();
  void register_counter(const std::string& name, TokenCounter counter);
  // Throws UnknownCounter.
  const TokenCounter& get(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, TokenCounter> counters_;
};

int heuristic_token_count(const std::string& text);

// Process-wide registry the pipeline resolves counter_id against; custom
// counters registered here become usable from configuration.
TokenCounterRegistry& default_token_counters();

struct DivisionInput {
  MethodId method;
  int tokens = 0;
};

struct DivisionPlan {
  std::vector<std::vector<MethodId>> groups;  // order within and across groups preserved
  std::vector<int> per_group_tokens;
  int k() const { return static_cast<int>(groups.size()); }
};

// Packs `entries` into the fewest contiguous-scan groups such that each
// group's token total stays within `token_limit - overhead_tokens`
// (greedy first fit, preserving entry order). Throws EntryExceedsBudget
// when a single entry cannot fit in an empty group.
DivisionPlan divide(const std::vector<DivisionInput>& entries, int token_limit,
                    int overhead_tokens);

}  // namespace faultnav
