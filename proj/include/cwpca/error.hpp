#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cwpca {

enum class ErrorCode {
    EmptyInput,
    NonFinite,
    NotSymmetric,
    NoConvergence,
    FormatError,
    DimensionMismatch,
    IoError,
    EmptyClass,
    InvalidK,
    InvalidM,
    InsufficientClassSamples,
    SingularScatter,
    RankDeficient,
    LabelOutOfRange,
    LengthMismatch,
    ConfigInvalid,
    SpecInvalid,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::InvalidM: return "InvalidM";
    case ErrorCode::InsufficientClassSamples: return "InsufficientClassSamples";
    case ErrorCode::SingularScatter: return "SingularScatter";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    }
    return "Unknown";
}

/// Every failure in the library is reported through this exception; `code()`
/// identifies the failure class, `what()` carries the context.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace cwpca
