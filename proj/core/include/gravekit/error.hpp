#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gravekit {

enum class ErrorCode {
    EmptyDocument,
    InvalidScaleConfig,
    UndecodableRaster,
    UnknownPage,
    UnknownDocument,
    SchemaError,
    UnknownLabel,
    PageMismatch,
    NoContours,
    DegenerateContour,
    UnparseableLabel,
    NonPositiveInput,
    ZeroVector,
    InvalidSector,
    TooFewPoints,
    TooFewSamples,
    IllegalTransition,
    DuplicateGraveId,
    ValidationPayloadError,
    StaleVersion,
    UnknownRecord,
    QueueEmpty,
    NoMatchedGraves,
    InvalidParams,
    StorageFailure,
    AdapterFailure,
    DetectorFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the engine carries one of the codes above so that
/// callers (CLI, HTTP layer) can map it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace gravekit
