#include "faultnav/prompts.hpp"

#include <cctype>

#include "faultnav/errors.hpp"

namespace faultnav {

namespace {

bool is_placeholder_word(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::islower(static_cast<unsigned char>(c)) && !std::isdigit(static_cast<unsigned char>(c)) &&
        c != '_') {
      return false;
    }
  }
  return true;
}

const char* kContextReasonText =
    "Analyze the test body and stack trace below and generate a test failure reason that\n"
    "summarizes the issue, the expected output, and the potential faulty location.\n"
    "\n"
    "## Input:\n"
    "Test code:\n"
    "{test_code}\n"
    "\n"
    "Stack trace:\n"
    "{stack_trace}\n"
    "\n"
    "## Response:\n"
    "Reply with exactly these three sections:\n"
    "## Test Purpose:\n"
    "<what the test verifies>\n"
    "## Expected Output:\n"
    "<what the test expects to happen>\n"
    "## Failure Reason:\n"
    "<why the test failed and where the fault likely is>\n";

const char* kContextPrioritizeText =
    "Using the failure reason below, select the methods from this coverage group that are\n"
    "most related to the failure and order them, most suspicious first. Leave out methods\n"
    "that look unrelated; selecting none is acceptable.\n"
    "\n"
    "Failure reason:\n"
    "{failure_reason}\n"
    "\n"
    "Covered methods, group {group_index} of {group_count}:\n"
    "{methods}\n"
    "\n"
    "Reply with only a JSON array of method identifiers, most suspicious first.\n"
    "Reply with [] if nothing in this group relates to the failure.\n";

const char* kDebuggerText =
    "Given the failure reasoning, stack trace and test code below, analyze, navigate and\n"
    "enhance the failure reasoning for the given methods to identify faults. If additional\n"
    "implementation details are needed, extract the call graph with get_call_graph and\n"
    "retrieve a caller's or callee's implementation with get_method_body. At the end,\n"
    "output (i) all of the analyzed methods, (ii) the enhanced failure reasoning and\n"
    "(iii) the fault ranking.\n"
    "\n"
    "## Input:\n"
    "Failure reason:\n"
    "{failure_reason}\n"
    "\n"
    "Stack trace:\n"
    "{stack_trace}\n"
    "\n"
    "Test code:\n"
    "{test_code}\n"
    "\n"
    "Prioritized methods:\n"
    "{prioritized_methods}\n"
    "\n"
    "## Response:\n"
    "Finish with only a JSON object of the form\n"
    "{\"analyzed\": [{\"method\": \"<id>\", \"reasoning\": \"<why>\"}, ...],\n"
    " \"ranking\": [{\"rank\": 1, \"method\": \"<id>\", \"reasoning\": \"<why>\"}, ...]}\n"
    "where every ranked method also appears under \"analyzed\".\n";

const char* kDebuggerSingleText =
    "Given the failure reasoning, stack trace and test code below, analyze the given\n"
    "methods using only the information provided and rank them by their likelihood of\n"
    "containing the fault. At the end, output (i) all of the analyzed methods, (ii) the\n"
    "enhanced failure reasoning and (iii) the fault ranking.\n"
    "\n"
    "## Input:\n"
    "Failure reason:\n"
    "{failure_reason}\n"
    "\n"
    "Stack trace:\n"
    "{stack_trace}\n"
    "\n"
    "Test code:\n"
    "{test_code}\n"
    "\n"
    "Prioritized methods:\n"
    "{prioritized_methods}\n"
    "\n"
    "## Response:\n"
    "Finish with only a JSON object of the form\n"
    "{\"analyzed\": [{\"method\": \"<id>\", \"reasoning\": \"<why>\"}, ...],\n"
    " \"ranking\": [{\"rank\": 1, \"method\": \"<id>\", \"reasoning\": \"<why>\"}, ...]}\n"
    "where every ranked method also appears under \"analyzed\".\n";

const char* kReviewerCritiqueText =
    "Given the test code, stack trace and per-method failure reasonings below, analyze\n"
    "and critique the current ranking of suspicious methods. Reflect on the reasoning\n"
    "quality and identify missing or superfluous details.{navigation_hint}\n"
    "\n"
    "## Evaluating the Current Ranking:\n"
    "Test code:\n"
    "{test_code}\n"
    "\n"
    "Stack trace:\n"
    "{stack_trace}\n"
    "\n"
    "Ranked methods with reasonings:\n"
    "{ranking}\n"
    "\n"
    "## Final Output:\n"
    "Finish with only a JSON object of the form\n"
    "{\"ranking\": [{\"rank\": 1, \"method\": \"<id>\", \"reasoning\": \"<why>\"}, ...]}\n"
    "containing your revised ranking.\n";

const char* kReviewerFinalizeText =
    "Finalize the review. Think step by step: for every method in your latest ranking,\n"
    "generate a probable fix. After writing all of the fixes, revisit all of the\n"
    "information and produce the final re-ranking.\n"
    "\n"
    "Finish with only a JSON object of the form\n"
    "{\"ranking\": [{\"rank\": 1, \"method\": \"<id>\", \"reasoning\": \"<why>\", "
    "\"fix\": \"<probable fix>\"}, ...]}\n"
    "with a fix for every entry.\n";

}  // namespace

std::string render_template(const PromptTemplate& tmpl,
                            const std::map<std::string, std::string>& values) {
  const std::string& text = tmpl.text;
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      out.push_back(text[i++]);
      continue;
    }
    size_t close = text.find('}', i + 1);
    std::string word =
        close == std::string::npos ? std::string() : text.substr(i + 1, close - i - 1);
    if (!is_placeholder_word(word)) {
      out.push_back(text[i++]);  // JSON brace in the template body
      continue;
    }
    auto it = values.find(word);
    if (it == values.end()) {
      raise(ErrorCode::Precondition,
            "template " + tmpl.id + " placeholder {" + word + "} has no value");
    }
    out += it->second;
    i = close + 1;
  }
  return out;
}

PromptLibrary::PromptLibrary() {
  add({kContextReasonTemplateId, kContextReasonText});
  add({kContextPrioritizeTemplateId, kContextPrioritizeText});
  add({kDebuggerTemplateId, kDebuggerText});
  add({kDebuggerSingleTemplateId, kDebuggerSingleText});
  add({kReviewerCritiqueTemplateId, kReviewerCritiqueText});
  add({kReviewerFinalizeTemplateId, kReviewerFinalizeText});
}

void PromptLibrary::add(PromptTemplate tmpl) { templates_[tmpl.id] = std::move(tmpl); }

const PromptTemplate& PromptLibrary::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) raise(ErrorCode::InvalidConfig, "unknown prompt template: " + id);
  return it->second;
}

std::vector<std::string> PromptLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, tmpl] : templates_) out.push_back(id);
  return out;
}

}  // namespace faultnav
