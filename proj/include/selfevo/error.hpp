#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace selfevo {

enum class Errc {
  schema,
  empty_session,
  unnormalizable_session,
  empty_corpus,
  range,
  precondition,
  template_error,
  backend,
  fixture,
  parse,
  vocabulary,
  numerical,
  path,
  alignment,
  unavailable,
  undefined_correlation,
  protocol,
  validation,
  pool,
  minimum_turns,
  not_found,
};

std::string_view to_string(Errc code);

/// Base exception for every failure surfaced by the library. The code is the
/// machine-readable category reported by the CLI error record.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Transport-level failure talking to a chat backend.
class BackendError : public Error {
 public:
  BackendError(const std::string& message, bool retryable)
      : Error(Errc::backend, message), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// Raised when fewer turns than the protocol minimum have been completed.
class MinimumTurnsError : public Error {
 public:
  MinimumTurnsError(const std::string& message, int remaining)
      : Error(Errc::minimum_turns, message), remaining_(remaining) {}

  int remaining() const noexcept { return remaining_; }

 private:
  int remaining_;
};

}  // namespace selfevo
