#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcdrop {

// Root of every exception thrown by the library. The three intermediate
// classes mirror how callers react: bad configuration, bad I/O or file
// contents, bad input data.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// ---- configuration ---------------------------------------------------------

class InvalidRate : public ConfigError {
 public:
  explicit InvalidRate(double rate)
      : ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate)), rate_(rate) {}
  double rate() const noexcept { return rate_; }

 private:
  double rate_;
};

class InvalidInjectionSite : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// ---- weight files ----------------------------------------------------------

class ChecksumMismatch : public IoError {
 public:
  using IoError::IoError;
};

class UnsupportedVersion : public IoError {
 public:
  explicit UnsupportedVersion(unsigned version)
      : IoError("unsupported weight file version " + std::to_string(version)), version_(version) {}
  unsigned version() const noexcept { return version_; }

 private:
  unsigned version_;
};

class ShapeMismatch : public IoError {
 public:
  using IoError::IoError;
};

// ---- tokens and sequences --------------------------------------------------

class InvalidResidue : public DataError {
 public:
  InvalidResidue(std::size_t position, char c)
      : DataError("invalid residue '" + std::string(1, c) + "' at position " +
                  std::to_string(position)),
        position_(position),
        char_(c) {}
  std::size_t position() const noexcept { return position_; }
  char character() const noexcept { return char_; }

 private:
  std::size_t position_;
  char char_;
};

class InvalidTokenId : public DataError {
 public:
  explicit InvalidTokenId(long long id)
      : DataError("token id " + std::to_string(id) + " is outside the vocabulary"), id_(id) {}
  long long id() const noexcept { return id_; }

 private:
  long long id_;
};

class SequenceTooLong : public DataError {
 public:
  SequenceTooLong(std::size_t length, std::size_t max_len)
      : DataError("sequence length " + std::to_string(length) + " exceeds max_len " +
                  std::to_string(max_len)) {}
};

class NonFiniteInput : public DataError {
 public:
  using DataError::DataError;
};

// ---- mutations and datasets ------------------------------------------------

class MalformedCode : public DataError {
 public:
  using DataError::DataError;
};

class DuplicatePosition : public DataError {
 public:
  explicit DuplicatePosition(std::size_t position)
      : DataError("mutation position " + std::to_string(position) + " appears more than once"),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class PositionOutOfRange : public DataError {
 public:
  PositionOutOfRange(std::size_t position, std::size_t length)
      : DataError("mutation position " + std::to_string(position) +
                  " is outside wildtype of length " + std::to_string(length)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class WildtypeMismatch : public DataError {
 public:
  WildtypeMismatch(std::size_t position, char expected, char found, std::size_t line = 0)
      : DataError(format(position, expected, found, line)),
        position_(position),
        expected_(expected),
        found_(found),
        line_(line) {}
  std::size_t position() const noexcept { return position_; }
  char expected() const noexcept { return expected_; }
  char found() const noexcept { return found_; }
  // 0 when the mismatch did not come from a file.
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(std::size_t position, char expected, char found, std::size_t line) {
    std::string msg;
    if (line != 0) msg = "line " + std::to_string(line) + ": ";
    msg += "wildtype mismatch at position " + std::to_string(position) + ": code expects '" +
           std::string(1, expected) + "', wildtype has '" + std::string(1, found) + "'";
    return msg;
  }

  std::size_t position_;
  char expected_;
  char found_;
  std::size_t line_;
};

class MissingColumn : public DataError {
 public:
  explicit MissingColumn(const std::string& column)
      : DataError("missing required column '" + column + "'"), column_(column) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyDataset : public DataError {
 public:
  using DataError::DataError;
};

// ---- statistics ------------------------------------------------------------

class LengthMismatch : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateInput : public DataError {
 public:
  using DataError::DataError;
};

class EmptyInput : public DataError {
 public:
  using DataError::DataError;
};

// Every family in an evaluation was skipped (or none were given).
class NothingEvaluable : public Error {
 public:
  using Error::Error;
};

}  // namespace mcdrop
