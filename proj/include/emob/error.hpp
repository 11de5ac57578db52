#ifndef EMOB_ERROR_HPP
#define EMOB_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace emob {

enum class ErrorCode {
    MissingColumn,
    MalformedTimestamp,
    OutOfRangeValue,
    InvalidTrace,
    NoOverlap,
    DegenerateTrip,
    DomainError,
    RankDeficient,
    NonMonotoneFit,
    OutOfRange,
    NegativeDrop,
    MissingAssistLevel,
    MissingFeature,
    UnknownDirection,
    UnknownToken,
    MixedKinds,
    NonFiniteInput,
    EmptyDataset,
    SchemaMismatch,
    CorruptModelFile,
    VersionMismatch,
    DegenerateInput,
    TooFewRows,
    LengthMismatch,
    EmptyInput,
    MissingSoc,
    InvalidArgument,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures are reported through this type; what() is prefixed
// with the code name, e.g. "MissingColumn: column 'soc' not in header".
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

} // namespace emob

#endif // EMOB_ERROR_HPP
