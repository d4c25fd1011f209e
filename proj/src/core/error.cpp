#include "refine_loop/core/error.hpp"

namespace refine_loop {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::EmptyDialogue: return "EmptyDialogue";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::NonContiguousIndex: return "NonContiguousIndex";
    case ErrorKind::InvalidValue: return "InvalidValue";
    case ErrorKind::Io: return "Io";
    case ErrorKind::BackendUnreachable: return "BackendUnreachable";
    case ErrorKind::BackendRejected: return "BackendRejected";
    case ErrorKind::ScriptMiss: return "ScriptMiss";
    case ErrorKind::TokenLimit: return "TokenLimit";
    case ErrorKind::UnparseablePayload: return "UnparseablePayload";
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::WrongKind: return "WrongKind";
    case ErrorKind::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorKind::UnknownTemplate: return "UnknownTemplate";
    case ErrorKind::EmptyDraft: return "EmptyDraft";
    case ErrorKind::DraftFailed: return "DraftFailed";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::EmptyReference: return "EmptyReference";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyTally: return "EmptyTally";
    case ErrorKind::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorKind::RuleInapplicable: return "RuleInapplicable";
    case ErrorKind::InsufficientGolds: return "InsufficientGolds";
    case ErrorKind::MissingSentence: return "MissingSentence";
    case ErrorKind::TargetUnreachable: return "TargetUnreachable";
    case ErrorKind::KeyMismatch: return "KeyMismatch";
    case ErrorKind::UnknownExperiment: return "UnknownExperiment";
    case ErrorKind::UnknownPair: return "UnknownPair";
    case ErrorKind::InvalidChoice: return "InvalidChoice";
    case ErrorKind::NoRecords: return "NoRecords";
    case ErrorKind::UnknownDialogue: return "UnknownDialogue";
    case ErrorKind::UnknownSentence: return "UnknownSentence";
    case ErrorKind::InvalidTurnIndex: return "InvalidTurnIndex";
    case ErrorKind::KeyUnavailable: return "KeyUnavailable";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void raise(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace refine_loop
