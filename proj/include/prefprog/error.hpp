#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prefprog {

enum class ErrorCode {
  kSyntax,
  kUnknownLabel,
  kUnresolvedName,
  kArityMismatch,
  kTypeError,
  kHoleBounds,
  kUnboundHole,
  kEmptyMask,
  kDepthUnavailable,
  kOutOfBounds,
  kSchema,
  kNameCollision,
  kCycle,
  kMissingDependency,
  kVersionFormat,
  kProviderFailure,
  kProviderResponse,
  kUnresolvedPredicate,
  kContractViolation,
  kUnsupportedAtom,
  kTooManyHoles,
  kChannel,
  kAwaitingUser,
  kRecursionDepth,
  kQueryCap,
  kDigestMismatch,
  kDimensionMismatch,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// Every module error carries a code so callers (CLI, HTTP layer) can map it
// without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(int line, int column, const std::string& message)
      : Error(ErrorCode::kSyntax, std::to_string(line) + ":" +
                                      std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace prefprog
