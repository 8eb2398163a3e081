#pragma once

#include <stdexcept>
#include <string>

namespace splitform {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Expression text could not be parsed; carries 1-based source position.
struct ParseError : Error {
  int line;
  int col;
  ParseError(std::string msg, int line_, int col_)
      : Error("parse error at " + std::to_string(line_) + ":" + std::to_string(col_) + ": " + std::move(msg)),
        line(line_), col(col_) {}
};

/// Evaluation hit a guarded domain boundary (zero denominator, log of a
/// non-positive value, derivative of sqrt at zero, complex constant in real
/// mode). Guards are hard errors, never silent NaNs.
struct DomainError : Error {
  using Error::Error;
};

/// A documented mathematical precondition failed (field not Euler-like,
/// transversal not cosymplectic, frame not isotropic, ...).
struct PreconditionError : Error {
  using Error::Error;
};

/// Numerical machinery failed: trajectory escaped the chart guard, an
/// iteration did not converge, or a conditioning guard tripped.
struct NumericError : Error {
  using Error::Error;
};

/// Scenario input violated the schema; carries a pointer-style path to the
/// offending field.
struct SchemaError : Error {
  std::string pointer;
  SchemaError(std::string msg, std::string ptr)
      : Error(std::move(msg) + " (at " + ptr + ")"), pointer(std::move(ptr)) {}
};

} // namespace splitform
