#pragma once

#include <stdexcept>
#include <string>

namespace ganomaly {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad configuration: invalid arch, unknown config keys, unsupported checkpoint version.
struct ConfigError : Error {
  using Error::Error;
};

/// Tensor/arch shape mismatch.
struct ShapeError : ConfigError {
  using ConfigError::ConfigError;
};

/// Problems with input data (files, formats, counts).
struct DataError : Error {
  using Error::Error;
};

/// Malformed file contents (bad magic, bad schema).
struct FormatError : DataError {
  using DataError::DataError;
};

/// Missing/truncated/corrupt files.
struct IoError : DataError {
  using DataError::DataError;
};

/// Non-finite losses, degenerate score ranges, undefined AUC.
struct NumericError : Error {
  using Error::Error;
};

// Process exit codes used by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

}  // namespace ganomaly
