#pragma once

#include <stdexcept>
#include <string>

namespace ckg {

// Root of every error the library throws. Subclasses name the stage that
// failed so the CLI can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A (knowledge type, relation) pair outside the validity matrix, a malformed
// record, or a template that cannot be rendered.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Unreadable or inconsistent configuration, missing credentials or assets.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Transient failures that survived every retry. Carries the last HTTP status
// (0 when the failure happened below HTTP, e.g. a timeout).
class TransportError : public Error {
 public:
  TransportError(int status, const std::string& what) : Error(what), status_(status) {}
  int last_status() const noexcept { return status_; }

 private:
  int status_;
};

// The endpoint rejected the request with a non-retryable 4xx.
class RequestError : public Error {
 public:
  RequestError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// The per-run request cap was hit before the call could be issued.
class RequestCapReached : public Error {
 public:
  using Error::Error;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

class FilterError : public Error {
 public:
  using Error::Error;
};

class StoreError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

// A well-formed request the eval service refuses (unknown sample or annotator).
class ValidationError : public EvalError {
 public:
  using EvalError::EvalError;
};

}  // namespace ckg
