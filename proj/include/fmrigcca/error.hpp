#pragma once

#include <stdexcept>
#include <string>

namespace fmrigcca {

/// Broad failure class; the CLI maps each onto an exit code.
enum class ErrorKind { validation, numerical, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// A precondition on the inputs was violated (bad sizes, out-of-range parameters).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

/// The data do not support the requested computation (degenerate view, rank too high,
/// collapsed fit).
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

/// Malformed file header or unparsable token.
class FormatError : public IoError {
 public:
  explicit FormatError(const std::string& what) : IoError(what) {}
};

/// File content disagrees with its declared (or implied) dimensions.
class DimensionMismatchError : public IoError {
 public:
  explicit DimensionMismatchError(const std::string& what) : IoError(what) {}
};

class NonFiniteError : public IoError {
 public:
  explicit NonFiniteError(const std::string& what) : IoError(what) {}
};

/// Exit code convention of the command-line tool.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace fmrigcca
