#pragma once

#include <stdexcept>
#include <string>

namespace rtc {

/// Broad category of a failure. The HTTP adapter maps each kind to a status
/// code, the CLI maps them to exit codes.
enum class ErrorKind {
  validation,     // malformed input or violated invariant (422)
  state,          // operation not allowed in the current lifecycle state (409)
  conflict,       // duplicate submission, consumed card (409)
  eligibility,    // matching rules forbid the participant (403)
  not_found,      // unknown id (404)
  unauthenticated,
  numerical,      // rank deficiency, separation, non-convergence
  io,
  transport,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Stable machine-readable identifier, e.g. "duplicate_rule_id".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string code, const std::string& message) {
  throw Error(kind, std::move(code), message);
}

}  // namespace rtc
