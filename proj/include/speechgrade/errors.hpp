#pragma once

#include <stdexcept>
#include <string>

namespace sg {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree (both shapes named in the message).
struct DimensionError : Error {
  using Error::Error;
};

// A configuration value is outside its legal range.
struct ParameterError : Error {
  using Error::Error;
};

// Structurally valid input that is too small/empty to process.
struct DegenerateInputError : Error {
  using Error::Error;
};

// Caller broke a documented precondition.
struct ContractError : Error {
  using Error::Error;
};

// Non-finite values, undefined statistics, numeric failure.
struct NumericError : Error {
  using Error::Error;
};

// QWK denominator vanished (all mass on one cell in both histograms).
struct UndefinedKappaError : NumericError {
  using NumericError::NumericError;
};

// Malformed text input; message carries the line number.
struct ParseError : Error {
  using Error::Error;
};

// Binary/file format violations (magic, version, shape table).
struct FormatError : Error {
  using Error::Error;
};

// Filesystem problems: missing, unreadable, unwritable.
struct IoError : Error {
  using Error::Error;
};

}  // namespace sg
