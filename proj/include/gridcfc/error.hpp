#pragma once

#include <stdexcept>
#include <string>

namespace gridcfc {

enum class ErrorCode {
  InvalidArgument = 1,
  Io,
  Parse,
  InvalidCase,
  Numerical,
  Empty,
  Mismatch,
};

// All library failures surface as this exception; the C API maps `code()`
// onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gridcfc
