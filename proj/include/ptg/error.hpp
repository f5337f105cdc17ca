#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ptg {

enum class ErrorCode {
    invalid_argument,
    not_found,
    conflict,
    incomplete,
    read_only,
    dimension_mismatch,
    parse_error,
    io_error,
    remote_error,
};

std::string_view to_string(ErrorCode code);

/// Exception type thrown by every module. The code maps onto HTTP statuses in
/// the annotation service and onto exit codes in the CLI.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ptg
