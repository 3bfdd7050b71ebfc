#pragma once

#include <stdexcept>
#include <string>

namespace sgg {

/// Malformed or inconsistent input: bad shapes, schema violations, invalid
/// indices. The CLI maps these to exit code 1.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operand shapes do not conform for the requested operation.
class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

/// JSON document does not match the interchange schema. The message carries
/// the offending field path, e.g. `objects[2].box`.
class SchemaError : public InputError {
 public:
  SchemaError(const std::string& path, const std::string& what)
      : InputError(path.empty() ? what : path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A NaN or Inf was produced, or training diverged. Exit code 2 in the CLI.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sgg
