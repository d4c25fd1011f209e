#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace refine_loop {

enum class ErrorKind {
  // core
  EmptyDialogue,
  MalformedRecord,
  NonContiguousIndex,
  InvalidValue,
  Io,
  // llm gateway
  BackendUnreachable,
  BackendRejected,
  ScriptMiss,
  TokenLimit,
  UnparseablePayload,
  MissingField,
  WrongKind,
  // agents / orchestration
  UnboundPlaceholder,
  UnknownTemplate,
  EmptyDraft,
  DraftFailed,
  InvalidConfig,
  // metrics
  EmptyReference,
  LengthMismatch,
  EmptyInput,
  EmptyTally,
  // autoeval
  ScoreOutOfRange,
  // harness
  RuleInapplicable,
  InsufficientGolds,
  MissingSentence,
  TargetUnreachable,
  KeyMismatch,
  // annotation service
  UnknownExperiment,
  UnknownPair,
  InvalidChoice,
  NoRecords,
  UnknownDialogue,
  UnknownSentence,
  InvalidTurnIndex,
  KeyUnavailable,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Domain error. Every failure named by a module contract surfaces as an
/// Error carrying its kind, so callers can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& message);

}  // namespace refine_loop
