#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace enstack {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that does not parse in its declared format. `line()` is 1-based, 0 when unknown.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A file that should exist does not.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Bad argument or configuration value.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class StratificationError : public Error {
 public:
  using Error::Error;
};

/// Training cannot proceed (single-class data and the like).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An external probability table does not cover every sample asked of it.
class CoverageError : public Error {
 public:
  CoverageError(const std::string& model, std::vector<std::string> missing);
  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  std::vector<std::string> missing_;
};

}  // namespace enstack
