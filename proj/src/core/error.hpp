#pragma once

#include <stdexcept>
#include <string>

namespace valign {

enum class ErrorCode {
  invalid_argument,
  degenerate,   // numerically ill-posed input (zero norm, zero variance, ...)
  parse,
  transport,    // provider/network failure after retries
  io,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::degenerate: return "degenerate";
    case ErrorCode::parse: return "parse";
    case ErrorCode::transport: return "transport";
    case ErrorCode::io: return "io";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

}  // namespace valign
