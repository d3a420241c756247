#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hitl {

/// Failure categories shared by every module. The CLI maps them onto exit
/// codes and the service maps them onto HTTP status codes.
enum class ErrorCode {
    rejected_input,     // caller passed values that violate a precondition
    malformed_stream,   // codec or file payload is corrupt
    generation,         // synthetic data could not be produced
    configuration,      // config combination cannot run
    divergence,         // training produced a non-finite loss
    contract_violation, // an operation was used outside its contract
    not_found,
    conflict,
    io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace hitl
