#pragma once

#include <stdexcept>
#include <string>

namespace dvk {

// Exit codes used by the command-line tool. Library code signals failures
// with the exception types below and the CLI maps them onto these codes.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kNumerical = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kData; }
};

/// Malformed or inconsistent input: bad files, dimension mismatches, missing artifacts.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a solver that cannot make progress.
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

class UsageError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

}  // namespace dvk
