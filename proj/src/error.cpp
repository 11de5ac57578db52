#include "emob/error.hpp"

namespace emob {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MalformedTimestamp: return "MalformedTimestamp";
    case ErrorCode::OutOfRangeValue: return "OutOfRangeValue";
    case ErrorCode::InvalidTrace: return "InvalidTrace";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::DegenerateTrip: return "DegenerateTrip";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonMonotoneFit: return "NonMonotoneFit";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NegativeDrop: return "NegativeDrop";
    case ErrorCode::MissingAssistLevel: return "MissingAssistLevel";
    case ErrorCode::MissingFeature: return "MissingFeature";
    case ErrorCode::UnknownDirection: return "UnknownDirection";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::MixedKinds: return "MixedKinds";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::CorruptModelFile: return "CorruptModelFile";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingSoc: return "MissingSoc";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message)
{
}

} // namespace emob
