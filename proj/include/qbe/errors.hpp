#pragma once

#include <stdexcept>
#include <string>

namespace qbe {

// Error taxonomy mirrors the CLI exit codes: UsageError -> 2,
// IoError/FormatError -> 3, NumericError -> 4.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed on-disk data: bad magic, truncation, non-finite payloads.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qbe
