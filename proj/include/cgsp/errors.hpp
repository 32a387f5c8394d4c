#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cgsp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data-side failures (exit code 3 in the CLI).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  FormatError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit FormatError(const std::string& what) : DataError(what) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

class EmptyCorpusError : public DataError {
 public:
  using DataError::DataError;
};

class IncompatibleVersionError : public DataError {
 public:
  using DataError::DataError;
};

class VocabularyMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConstraintError : public Error {
 public:
  using Error::Error;
};

// Numeric failures (exit code 4 in the CLI).
class NumericError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cgsp
