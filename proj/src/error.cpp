#include "wbmorph/error.hpp"

namespace wbmorph {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::AllZeroInput: return "AllZeroInput";
    case ErrorCode::NegativeInput: return "NegativeInput";
    case ErrorCode::InvalidMeasure: return "InvalidMeasure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::EmptyInputs: return "EmptyInputs";
    case ErrorCode::StepNotPositive: return "StepNotPositive";
    case ErrorCode::SparsityOutOfRange: return "SparsityOutOfRange";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::ProcessUnavailable: return "ProcessUnavailable";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::InconsistentState: return "InconsistentState";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
{
}

}  // namespace wbmorph
