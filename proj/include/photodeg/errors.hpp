#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace photodeg {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (log of a
// nonpositive dosage, ND fraction <= 0, grid not covering a window, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Input is structurally valid but carries no usable information.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class ExtrapolationError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class MissingDataError : public Error {
 public:
  using Error::Error;
};

// Imputation could not find donor observations. Carries the offending
// timestamps (seconds since the Unix epoch).
class ImputationError : public MissingDataError {
 public:
  ImputationError(const std::string& what, std::vector<long long> timestamps)
      : MissingDataError(what), timestamps_(std::move(timestamps)) {}
  const std::vector<long long>& timestamps() const { return timestamps_; }

 private:
  std::vector<long long> timestamps_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Model parameters are not identifiable from the data supplied.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<std::string> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<std::string>& trace() const { return trace_; }

 private:
  std::vector<std::string> trace_;
};

}  // namespace photodeg
