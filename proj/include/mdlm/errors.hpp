// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mdlm {

// Bad or inconsistent configuration / arguments. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / file-format trouble. CLI exit code 3.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or numeric divergence. CLI exit code 4.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class CheckpointFault {
  magic_mismatch,
  version_mismatch,
  truncated,
  shape_mismatch,
};

class CheckpointError : public IoError {
 public:
  CheckpointError(CheckpointFault fault, const std::string& msg)
      : IoError(msg), fault_(fault) {}
  CheckpointFault fault() const { return fault_; }

 private:
  CheckpointFault fault_;
};

}  // namespace mdlm
