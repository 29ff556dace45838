#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace statesafe {

enum class ErrorKind {
  DomainTooLarge,
  UnboundedComponent,
  SchemaMismatch,
  UnknownIdentifier,
  PreconditionViolated,
  UnknownOperation,
  BadParams,
  BadBounds,
  UnknownSpec,
  MalformedEvent,
  UnknownMessage,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::DomainTooLarge: return "DomainTooLarge";
    case ErrorKind::UnboundedComponent: return "UnboundedComponent";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::UnknownOperation: return "UnknownOperation";
    case ErrorKind::BadParams: return "BadParams";
    case ErrorKind::BadBounds: return "BadBounds";
    case ErrorKind::UnknownSpec: return "UnknownSpec";
    case ErrorKind::MalformedEvent: return "MalformedEvent";
    case ErrorKind::UnknownMessage: return "UnknownMessage";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DomainTooLarge : public Error {
 public:
  DomainTooLarge(std::uint64_t cardinality, std::uint64_t cap, const std::string& what)
      : Error(ErrorKind::DomainTooLarge, what), cardinality_(cardinality), cap_(cap) {}

  /// Saturates at UINT64_MAX.
  std::uint64_t cardinality() const noexcept { return cardinality_; }
  std::uint64_t cap() const noexcept { return cap_; }

 private:
  std::uint64_t cardinality_;
  std::uint64_t cap_;
};

/// Truth value of one top-level conjunct, with a short rendering of the
/// values of its immediate sub-expressions.
struct ClauseResult {
  std::string text;
  bool holds = true;
  std::string detail;
};

class PreconditionViolated : public Error {
 public:
  PreconditionViolated(const std::string& op, std::vector<ClauseResult> clauses)
      : Error(ErrorKind::PreconditionViolated, "precondition of " + op + " is false"),
        operation_(op),
        clauses_(std::move(clauses)) {}

  const std::string& operation() const noexcept { return operation_; }
  const std::vector<ClauseResult>& clauses() const noexcept { return clauses_; }

 private:
  std::string operation_;
  std::vector<ClauseResult> clauses_;
};

}  // namespace statesafe
