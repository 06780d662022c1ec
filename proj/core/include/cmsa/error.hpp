#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace cmsa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid input data. Carries the 1-based line/record
/// number when one is known.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what,
                     std::optional<std::size_t> line = std::nullopt)
      : Error(line ? "line " + std::to_string(*line) + ": " + what : what),
        line_(line) {}

  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  std::optional<std::size_t> line_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// A submission disagrees with an already recorded one.
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// An operation the workflow rules do not allow in the current state.
class PolicyError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmsa
