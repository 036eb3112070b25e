#pragma once

#include <stdexcept>
#include <string>

namespace cep {

// Base of every error raised by the library. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unknown table/column, missing checkpoint, malformed task string.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside its documented range.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A join would exceed the materialization cap.
class SizeError : public Error {
 public:
  using Error::Error;
};

// A value has no representation in the model's current domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A numeric value falls into a deleted gap of a remapped column.
class GapError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Checkpoint or sidecar file failed to parse or verify.
class FormatError : public Error {
 public:
  using Error::Error;
};

class EmptyRelationError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

// A pipeline stage ran before the outputs it depends on exist.
class StageError : public Error {
 public:
  using Error::Error;
};

}  // namespace cep
