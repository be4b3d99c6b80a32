#pragma once

#include "gravekit/assemble.hpp"
#include "gravekit/calibrate.hpp"
#include "gravekit/geometry.hpp"
#include "gravekit/ingest.hpp"
#include "gravekit/morpho.hpp"
#include "gravekit/orient.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gravekit {

enum class ValidationStatus {
    Detected,
    Step1_Id,
    Step2_Boxes,
    Step3_Contours,
    Step4_Scale,
    Step5_North,
    Step6_Pose,
    Validated,
    Discarded,
};

std::string_view to_string(ValidationStatus status) noexcept;
std::optional<ValidationStatus> parse_status(std::string_view text) noexcept;

enum class Pose { unknown, supine, flexed_on_side };

std::string_view to_string(Pose pose) noexcept;
std::optional<Pose> parse_pose(std::string_view text) noexcept;

struct Measurements {
    std::optional<double> width_cm;
    std::optional<double> length_cm;
    std::optional<double> depth_cm;
    std::optional<double> grave_bearing_deg;

    bool operator==(const Measurements&) const = default;
};

struct SkeletonEntry {
    std::string detection_id;
    Pose pose = Pose::unknown;
    std::optional<SpineArrow> spine;
    std::optional<double> bearing_deg;

    bool operator==(const SkeletonEntry&) const = default;
};

struct EditLogEntry {
    std::string timestamp;
    int step = 0;  // 1..6 for wizard steps, 0 for automated work, 7 for the final confirmation
    std::string change;

    bool operator==(const EditLogEntry&) const = default;
};

/// Human input accumulated over the wizard steps. Everything derived is
/// recomputed from the automated results plus these edits.
struct RecordEdits {
    // Step 2
    std::optional<BBox> grave_bbox;
    std::optional<std::optional<std::string>> scale_id;  // inner nullopt: explicitly none
    std::optional<std::optional<std::string>> north_arrow_id;
    std::optional<std::optional<std::string>> cross_section_id;
    std::vector<Detection> added;
    std::vector<std::string> removed;
    std::map<std::string, SpineArrow> spines;
    // Step 3
    std::optional<BBox> manual_grave_box;
    std::optional<BBox> manual_section_box;
    // Step 4
    std::optional<std::string> scale_text;
    std::optional<double> fixed_ratio;
    std::optional<double> page_height_cm;
    std::optional<double> px_per_cm;
    // Step 5
    std::optional<double> north_angle_deg;
    // Step 6
    std::map<std::string, Pose> poses;

    bool operator==(const RecordEdits&) const = default;
};

/// Pixel-level results of the automated pipeline, kept so that scale and
/// north corrections only redo arithmetic.
struct GeometryCache {
    std::optional<Contour> grave_contour;  // page coordinates
    std::optional<RotatedRect> grave_rect;
    std::optional<double> scale_pixel_length;
    std::optional<std::string> ocr_text;
    std::optional<RotatedRect> section_rect;
    std::optional<NorthArrow> auto_north;
    std::vector<std::string> issues;

    bool operator==(const GeometryCache&) const = default;
};

struct GraveRecord {
    std::string record_id;
    std::string publication_grave_id;
    std::string document_id;
    std::string page_id;
    int page_index = 0;
    ValidationStatus status = ValidationStatus::Detected;
    GraveTree tree;
    Measurements measurements;
    std::vector<SkeletonEntry> skeletons;
    std::optional<Outline> outline;
    bool manual_box = false;
    std::optional<Conversion> conversion;
    std::optional<ScaleBar> scale_bar;
    std::optional<NorthArrow> north;
    std::vector<std::string> issues;
    bool needs_manual_box = false;
    GeometryCache geometry;
    RecordEdits edits;
    std::vector<EditLogEntry> edit_log;
    int version = 1;
};

nlohmann::ordered_json to_json(const GraveRecord& record);
GraveRecord record_from_json(const nlohmann::json& j);

/// Everything that turns a tree into measurements.
struct PipelineOptions {
    NorthStrategy north_strategy = NorthStrategy::Geometric;
    ArrowClassifier arrow_classifier;
    /// Label text for a scale crop; nullopt when the OCR is unavailable.
    std::function<std::optional<std::string>(const GrayImage& crop, const Detection& scale)> ocr;
    double confidence_threshold = 0.8;
};

/// The page a record lives on, with its raster and stored detections.
struct PageContext {
    const Document& document;
    const Page& page;
    const GrayImage& raster;
    const std::vector<Detection>& detections;
};

struct RecordContext {
    PageContext page;
    const PipelineOptions& pipeline;
    /// True when another live record of the document already uses this id.
    std::function<bool(const std::string& grave_id)> grave_id_taken;
    std::function<std::string()> now;
};

// -- Pipeline stages ------------------------------------------------------

/// Tree for the record's grave after Step 2 edits: boxes changed, objects
/// added or removed, pinned scale/arrow/section.
GraveTree rebuild_tree(const GraveRecord& record, const std::vector<Detection>& page_detections);

/// Crops and measures the tree's objects on the raster.
GeometryCache measure_tree(const GraveTree& tree, const RecordEdits& edits, const PageContext& page,
                           const PipelineOptions& options);

/// Conversion, real-unit measurements, bearings and outline from the cache
/// and the edits. Pure arithmetic.
void finalize(GraveRecord& record, const Document& document, const Page& page);

// -- Operations -----------------------------------------------------------

GraveRecord create_record(const GraveTree& tree, const RecordContext& context);

enum class Action { advance, back, discard };

std::optional<Action> parse_action(std::string_view text) noexcept;

/// Applies one wizard action. Returns the new record (version + 1); the
/// input is never modified. Throws IllegalTransition, DuplicateGraveId or
/// ValidationPayloadError.
GraveRecord transition(const GraveRecord& record, Action action, const nlohmann::json& payload,
                       const RecordContext& context);

/// Re-runs assembly, geometry, calibration, orientation and outline
/// normalisation; derived fields are replaced and the edit log appended.
GraveRecord recompute(const GraveRecord& record, const RecordContext& context);

/// Status the next `advance` leads to, honouring the Step 5 skip.
std::optional<ValidationStatus> next_status(const GraveRecord& record) noexcept;

// -- Export ---------------------------------------------------------------

struct ExportSkeleton {
    std::string pose;
    std::optional<double> bearing_deg;

    bool operator==(const ExportSkeleton&) const = default;
};

/// One grave as it appears in an export.
struct ExportRow {
    std::string document_id;
    std::string grave_id;
    int page = 0;
    std::optional<double> width_cm;
    std::optional<double> length_cm;
    std::optional<double> depth_cm;
    std::optional<double> grave_bearing_deg;
    std::vector<ExportSkeleton> skeletons;
    std::optional<double> px_per_cm;  // JSON exports only

    bool operator==(const ExportRow&) const = default;
};

ExportRow export_row(const GraveRecord& record);

enum class ExportFormat { csv, json };

/// Validated records only unless `include_all`; record order is kept.
std::string export_records(const std::vector<GraveRecord>& records, ExportFormat format,
                           bool include_all = false);

std::vector<ExportRow> parse_export_csv(std::string_view csv);
std::string export_rows_csv(const std::vector<ExportRow>& rows);

/// Records and rows from a JSON export.
std::vector<GraveRecord> parse_export_json(std::string_view json);
std::vector<ExportRow> export_rows_from_json(std::string_view json);

struct BaselineComparison {
    std::map<std::string, double> per_grave_error_pct;
    double mean_error_pct = 0.0;
    int n_compared = 0;
};

/// Sums per-attribute percentage deviations per grave (attributes missing on
/// either side are skipped) and averages over graves matched by grave id.
/// Bearings use circular differences. Throws NoMatchedGraves.
BaselineComparison compare_to_baseline(const std::vector<ExportRow>& candidate,
                                       const std::vector<ExportRow>& baseline);

}  // namespace gravekit
