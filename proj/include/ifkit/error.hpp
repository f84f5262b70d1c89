#pragma once

#include <stdexcept>
#include <string>

namespace ifkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invariant-violating corpus input.
class CorpusError : public Error {
 public:
  using Error::Error;
};

class VerifyError : public Error {
 public:
  using Error::Error;
};

class CompositionError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

/// Raised by providers for failures worth retrying (network errors, 429, 5xx).
class TransientError : public Error {
 public:
  using Error::Error;
};

class GatewayError : public Error {
 public:
  explicit GatewayError(const std::string& what, int status = 0)
      : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class StrategyError : public Error {
 public:
  using Error::Error;
};

/// parse_reflection could not find a FINAL ANSWER section.
class ReflectionParseError : public StrategyError {
 public:
  using StrategyError::StrategyError;
};

class RouterError : public Error {
 public:
  using Error::Error;
};

class AttentionError : public Error {
 public:
  using Error::Error;
};

class ReportError : public Error {
 public:
  using Error::Error;
};

}  // namespace ifkit
