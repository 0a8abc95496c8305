#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace thermocal {

/// Failure categories surfaced by every module. The CLI maps them onto exit codes.
enum class ErrorCode {
  input,       // malformed file, bad argument, precondition violated
  config,      // model/sensor configuration does not match the data
  domain,      // mathematically undefined request (empty residuals, ...)
  degenerate,  // rank-deficient or insufficient regression data
  leakage,     // validation data overlaps training data
  range,       // value outside the actuator stroke
  numeric,     // iteration failed to converge
  stability,   // integration step too large for the plant
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::input: return "input_error";
  case ErrorCode::config: return "config_error";
  case ErrorCode::domain: return "domain_error";
  case ErrorCode::degenerate: return "degenerate_data";
  case ErrorCode::leakage: return "leakage";
  case ErrorCode::range: return "range_error";
  case ErrorCode::numeric: return "numeric_error";
  case ErrorCode::stability: return "stability_error";
  }
  return "unknown_error";
}

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

} // namespace thermocal
