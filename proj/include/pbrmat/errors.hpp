#pragma once

#include <stdexcept>
#include <string>

namespace pbrmat {

// File-system or stream failure. The CLI maps this to exit code 2,
// as opposed to std::invalid_argument (bad parameters/config, exit 1).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct PfmError : IoError {
  enum class Kind { kBadHeader, kBadDims, kBadScale, kBigEndian, kTruncated };
  Kind kind;
  PfmError(Kind k, const std::string& what) : IoError(what), kind(k) {}
};

}  // namespace pbrmat
