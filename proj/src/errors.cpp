#include "faultnav/errors.hpp"

namespace faultnav {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoFailingTest: return "NoFailingTest";
    case ErrorCode::EmptyExternalScores: return "EmptyExternalScores";
    case ErrorCode::MalformedGraph: return "MalformedGraph";
    case ErrorCode::DanglingEdge: return "DanglingEdge";
    case ErrorCode::DuplicateMethod: return "DuplicateMethod";
    case ErrorCode::MethodNotFound: return "MethodNotFound";
    case ErrorCode::UnparsableTrace: return "UnparsableTrace";
    case ErrorCode::FailingLineOutOfRange: return "FailingLineOutOfRange";
    case ErrorCode::UnknownCounter: return "UnknownCounter";
    case ErrorCode::EntryExceedsBudget: return "EntryExceedsBudget";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::BackendRefusal: return "BackendRefusal";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::ToolLoopExhausted: return "ToolLoopExhausted";
    case ErrorCode::UnparsableRanking: return "UnparsableRanking";
    case ErrorCode::MockScriptError: return "MockScriptError";
    case ErrorCode::MissingSection: return "MissingSection";
    case ErrorCode::UnparsableReply: return "UnparsableReply";
    case ErrorCode::Precondition: return "Precondition";
    case ErrorCode::MalformedBundle: return "MalformedBundle";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "UnknownError";
}

}  // namespace faultnav
