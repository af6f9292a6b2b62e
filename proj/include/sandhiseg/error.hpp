#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sandhiseg {

enum class ErrorCode {
    EmptyInput,
    InvalidConfig,
    UnmappableCandidate,
    NoPath,
    NumericalError,
    DegenerateRow,
    AlignmentOverflow,
    AlignmentMismatch,
    EmptyCorpus,
    EmptyText,
    UnknownLabel,
    IoError,
    ParseError,
    NotFound,
    InvalidSelection,
    Incomplete,
};

std::string_view to_string(ErrorCode code);

// Every recoverable failure in the library is reported through this type;
// callers switch on code() rather than parsing the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace sandhiseg
