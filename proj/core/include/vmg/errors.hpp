#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vmg {

// Shape or precondition violations on public entry points.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN / Inf detected in a loss, gradient or user-supplied reward.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training hit a non-finite loss; `last_checkpoint` is the newest file still on disk (may be empty).
class TrainingAborted : public NumericFault {
 public:
  TrainingAborted(const std::string& what, std::string last_checkpoint)
      : NumericFault(what), last_checkpoint_(std::move(last_checkpoint)) {}
  const std::string& last_checkpoint() const noexcept { return last_checkpoint_; }

 private:
  std::string last_checkpoint_;
};

// Malformed file content. `record` is the 1-based line (text) or record index (binary).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t record);
  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

// Well-formed content that violates a structural invariant.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation invoked in the wrong state (e.g. stepping a finished episode).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invariant broken inside the library; indicates a bug rather than bad input.
class InternalConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Failure while executing a policy in an environment; the original error is nested.
class ExecutionError : public std::runtime_error {
 public:
  ExecutionError(const std::string& what, std::size_t episode, std::size_t step);
  std::size_t episode() const noexcept { return episode_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t episode_;
  std::size_t step_;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& constraint);
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class HashMismatch : public std::runtime_error {
 public:
  HashMismatch(std::string stage, const std::string& path);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace vmg
