#pragma once

#include <map>
#include <string>
#include <vector>

namespace faultnav {

struct PromptTemplate {
  std::string id;    // "name/vN"
  std::string text;  // {placeholder} slots, lowercase/underscore names only
};

// Renders `{name}` placeholders from `values`. Brace runs that are not a
// bare lowercase word (JSON examples in the template text) pass through
// untouched; a placeholder without a value raises Precondition.
std::string render_template(const PromptTemplate& tmpl,
                            const std::map<std::string, std::string>& values);

// Built-in versioned templates, addressable by id so configurations can pin
// or swap them. Throws InvalidConfig for unknown ids.
class PromptLibrary {
 public:
  PromptLibrary();
  const PromptTemplate& get(const std::string& id) const;
  std::vector<std::string> ids() const;
  void add(PromptTemplate tmpl);  // replaces an existing id

 private:
  std::map<std::string, PromptTemplate> templates_;
};

// Default template ids wired into PipelineConfig.
inline constexpr const char* kContextReasonTemplateId = "context_failure_reason/v1";
inline constexpr const char* kContextPrioritizeTemplateId = "context_prioritize/v1";
inline constexpr const char* kDebuggerTemplateId = "debugger/v1";
inline constexpr const char* kDebuggerSingleTemplateId = "debugger_single/v1";
inline constexpr const char* kReviewerCritiqueTemplateId = "reviewer_critique/v1";
inline constexpr const char* kReviewerFinalizeTemplateId = "reviewer_finalize/v1";

}  // namespace faultnav
