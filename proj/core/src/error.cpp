#include "gravekit/error.hpp"

namespace gravekit {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::EmptyDocument: return "EmptyDocument";
        case ErrorCode::InvalidScaleConfig: return "InvalidScaleConfig";
        case ErrorCode::UndecodableRaster: return "UndecodableRaster";
        case ErrorCode::UnknownPage: return "UnknownPage";
        case ErrorCode::UnknownDocument: return "UnknownDocument";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::UnknownLabel: return "UnknownLabel";
        case ErrorCode::PageMismatch: return "PageMismatch";
        case ErrorCode::NoContours: return "NoContours";
        case ErrorCode::DegenerateContour: return "DegenerateContour";
        case ErrorCode::UnparseableLabel: return "UnparseableLabel";
        case ErrorCode::NonPositiveInput: return "NonPositiveInput";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::InvalidSector: return "InvalidSector";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::IllegalTransition: return "IllegalTransition";
        case ErrorCode::DuplicateGraveId: return "DuplicateGraveId";
        case ErrorCode::ValidationPayloadError: return "ValidationPayloadError";
        case ErrorCode::StaleVersion: return "StaleVersion";
        case ErrorCode::UnknownRecord: return "UnknownRecord";
        case ErrorCode::QueueEmpty: return "QueueEmpty";
        case ErrorCode::NoMatchedGraves: return "NoMatchedGraves";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::StorageFailure: return "StorageFailure";
        case ErrorCode::AdapterFailure: return "AdapterFailure";
        case ErrorCode::DetectorFailure: return "DetectorFailure";
    }
    return "Unknown";
}

}  // namespace gravekit
