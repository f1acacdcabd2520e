#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mepp {

enum class ErrorKind {
  usage,
  parse,
  semantic,
  domain,
  range,
  step_rejected,
  unsupported,
  io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a time step would leave the admissible set (e.g. rho <= 0 under
/// the Boltzmann entropy). Carries the offending cell so the caller can react.
class StepRejected : public Error {
 public:
  StepRejected(std::size_t cell, const std::string& message)
      : Error(ErrorKind::step_rejected, message), cell_(cell) {}

  std::size_t cell() const noexcept { return cell_; }

 private:
  std::size_t cell_;
};

/// Domain error tied to one cell of one component.
class CellError : public Error {
 public:
  CellError(std::size_t component, std::size_t cell, const std::string& message)
      : Error(ErrorKind::domain, message), component_(component), cell_(cell) {}

  std::size_t component() const noexcept { return component_; }
  std::size_t cell() const noexcept { return cell_; }

 private:
  std::size_t component_;
  std::size_t cell_;
};

class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::size_t line, std::size_t column,
             const std::string& message)
      : Error(kind, format(line, column, message)),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(std::size_t line, std::size_t column,
                            const std::string& message) {
    return "line " + std::to_string(line) + ", column " +
           std::to_string(column) + ": " + message;
  }

  std::size_t line_;
  std::size_t column_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace mepp
