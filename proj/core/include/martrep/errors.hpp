#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace martrep {

// Error taxonomy, mirrored by the CLI exit-code contract:
//   ValidationError          -> exit 1   (bad model file / structural input)
//   RefusalError and below   -> exit 2   (violated precondition or assumption)
//   InternalConsistencyError -> exit 3   (two routes that must agree disagreed)
class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public EngineError {
 public:
  ValidationError(std::string path, const std::string& what)
      : EngineError(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;  // slash-separated path into the offending document field
};

class RefusalError : public EngineError {
 public:
  using EngineError::EngineError;
};

// Caller broke an operation's stated precondition.
class ContractError : public RefusalError {
 public:
  using RefusalError::RefusalError;
};

// A named hypothesis failed on this model (decoupling, uniqueness, mmm, ...).
class AssumptionError : public RefusalError {
 public:
  AssumptionError(std::string assumption, const std::string& what)
      : RefusalError("assumption " + assumption + " failed: " + what),
        assumption_(std::move(assumption)) {}
  const std::string& assumption() const noexcept { return assumption_; }

 private:
  std::string assumption_;
};

class UnsupportedError : public RefusalError {
 public:
  using RefusalError::RefusalError;
};

// Conditional expectation requested on a cell of total measure zero.
class DegenerateCellError : public ContractError {
 public:
  using ContractError::ContractError;
};

class InternalConsistencyError : public EngineError {
 public:
  using EngineError::EngineError;
};

}  // namespace martrep
