#pragma once

#include <stdexcept>
#include <string>

namespace egolabel {

enum class ErrorCode {
    BehindCamera,
    OutsideFieldOfView,
    DegenerateBone,
    DegenerateConfiguration,
    InsufficientPoints,
    NotConverged,
    InsufficientData,
    DimensionMismatch,
    InitializationFailure,
    SequenceTooShort,
    ShapeMismatch,
    SchemaError,
    InvalidArgument,
};

const char* to_string(ErrorCode code);

/// Every recoverable failure in the library is reported with one of these.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace egolabel
