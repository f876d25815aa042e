#pragma once

#include <stdexcept>
#include <string>

namespace edgeprune {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller passed arguments that violate an operation's preconditions.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t batch, const std::string& what)
      : Error(what), epoch_(epoch), batch_(batch) {}
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

/// A dataset or model file could not be read.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class ProfilingError : public Error {
 public:
  using Error::Error;
};

/// Encoded feature blob failed integrity or format checks.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Simulated trace disagrees with a plan's prediction.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Configuration file or override could not be parsed or is out of range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was invoked before the stage it depends on.
class PrerequisiteError : public Error {
 public:
  PrerequisiteError(std::string missing_stage, const std::string& what)
      : Error(what), missing_stage_(std::move(missing_stage)) {}
  const std::string& missing_stage() const { return missing_stage_; }

 private:
  std::string missing_stage_;
};

/// No catalog record satisfies the accuracy floor.
class InfeasiblePlan : public Error {
 public:
  using Error::Error;
};

}  // namespace edgeprune
