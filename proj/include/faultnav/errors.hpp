#pragma once

#include <stdexcept>
#include <string>

namespace faultnav {

// Typed failure categories. Each maps onto a coarse status code at the C API
// boundary; the message carries the specifics.
enum class ErrorCode {
  // spectra
  MalformedLine,
  DimensionMismatch,
  NoFailingTest,
  EmptyExternalScores,
  // codegraph
  MalformedGraph,
  DanglingEdge,
  DuplicateMethod,
  MethodNotFound,
  // preprocess
  UnparsableTrace,
  FailingLineOutOfRange,
  // division
  UnknownCounter,
  EntryExceedsBudget,
  // llm
  TransportError,
  BackendRefusal,
  ContextOverflow,
  ToolLoopExhausted,
  UnparsableRanking,
  MockScriptError,
  // agents
  MissingSection,
  UnparsableReply,
  Precondition,
  // io / config
  MalformedBundle,
  IoError,
  InvalidConfig,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const { return code_; }
  const std::string& message() const { return message_; }  // without the code prefix

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace faultnav
