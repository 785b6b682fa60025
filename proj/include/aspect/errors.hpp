#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aspect {

/// Precondition or invariant breach in a caller-supplied argument.
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A semantic- or state-map lookup outside the declared domain/codomain.
struct MappingError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Iterative solver exceeded its iteration cap.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caption text does not match the caption grammar.
struct CaptionParseError : std::runtime_error {
  CaptionParseError(const std::string& what, std::size_t pos)
      : std::runtime_error(what + " (at position " + std::to_string(pos) + ")"),
        position(pos) {}
  std::size_t position;
};

/// A label that is not part of the declared vocabulary.
struct VocabularyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Base for remote semantic-operator failures.
struct OperatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TransportError : OperatorError {
  using OperatorError::OperatorError;
};

struct RequestTimeoutError : OperatorError {
  using OperatorError::OperatorError;
};

/// Operator output failed schema validation; keeps the raw text for logging.
struct SchemaError : OperatorError {
  SchemaError(const std::string& what, std::string raw_text)
      : OperatorError(what), raw(std::move(raw_text)) {}
  std::string raw;
};

}  // namespace aspect
