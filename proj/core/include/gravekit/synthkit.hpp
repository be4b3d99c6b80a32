#pragma once

#include "gravekit/detect.hpp"
#include "gravekit/geometry.hpp"
#include "gravekit/image.hpp"
#include "gravekit/orient.hpp"
#include "gravekit/records.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

// Synthetic catalogue pages with known answers. Each page carries one scale
// bar and one north arrow in a top band and up to four graves laid out in a
// 2 x 2 grid, each with its cross-section to the right.

namespace gravekit {

struct SynthParams {
    int width_px = 2400;
    int height_px = 1900;
    int graves_min = 1;
    int graves_max = 4;
    double grave_width_min_cm = 50.0;
    double grave_width_max_cm = 150.0;
    double grave_length_max_cm = 250.0;
    double depth_min_cm = 20.0;
    double depth_max_cm = 120.0;
    double px_per_cm_min = 2.0;
    double px_per_cm_max = 2.5;
    double arrow_probability = 1.0;
    double jitter_px = 3.0;  // inward outline jitter amplitude

    // Noise, off by default.
    double speckle_density = 0.0;       // fraction of page pixels inked at random
    double stroke_break_probability = 0.0;

    // Detection degradation, off by default.
    double drop_probability = 0.0;  // skeletons, artefacts and cross-sections
    double bbox_perturbation = 0.0;  // edge shift as a fraction of the box size

    /// Throws InvalidParams.
    void validate() const;
};

struct TruthSkeleton {
    std::string detection_id;
    Pose pose = Pose::unknown;
    SpineArrow spine;  // page pixels, pelvis to skull
    double bearing_deg = 0.0;
};

struct TruthGrave {
    std::string grave_id;  // S<seed>-P<page>-G<k>
    std::string detection_id;
    double width_cm = 0.0;
    double length_cm = 0.0;
    double depth_cm = 0.0;
    double axis_image_deg = 0.0;  // [0, 180)
    double axis_bearing_deg = 0.0;
    std::vector<Point2d> polygon_px;
    std::vector<TruthSkeleton> skeletons;
};

struct TruthPage {
    int page_index = 0;
    double px_per_cm = 0.0;
    std::string scale_detection_id;
    double scale_pixel_length = 0.0;
    std::string scale_label;
    std::string arrow_detection_id;  // empty when the page has no arrow
    double north_angle_deg = 0.0;
    std::vector<TruthGrave> graves;
};

struct SynthPage {
    GrayImage raster;
    std::vector<Detection> detections;  // page_id "p<index>"
    TruthPage truth;
    std::map<std::string, std::string> labels;  // scale detection id -> label text
};

/// Deterministic for (seed, page_index, params).
SynthPage generate_page(std::uint64_t seed, int page_index, const SynthParams& params = {});

nlohmann::json truth_json(const std::vector<TruthPage>& pages, std::uint64_t seed);
std::vector<TruthPage> truth_from_json(const nlohmann::json& j);

/// Truth as export rows, for compare_to_baseline.
std::vector<ExportRow> truth_rows(const std::vector<TruthPage>& pages);

/// Validation a careful human would do on generated pages: the true grave
/// id, one spine per skeleton, accepted boxes, contour and scale, the pose,
/// and the north angle typed in when `manual_north` (otherwise the automatic
/// angle is accepted). Format of Service::apply_corrections.
nlohmann::json scripted_corrections(const std::vector<TruthPage>& pages, bool manual_north);

struct CorpusFiles {
    std::string manifest;             // manifest.json
    std::string detections;           // detections.jsonl, pages named "p<index>"
    std::string truth;                // truth.json
    std::string labels;               // labels.json, scale detection id -> label text
    std::string corrections;          // corrections.json, north typed in
    std::string corrections_auto;     // corrections-auto.json, automatic north accepted
};

/// Pages 0..pages-1 as page-NNN.png plus the files above.
CorpusFiles write_corpus(const std::string& dir, std::uint64_t seed, int pages, const SynthParams& params = {});

struct ScoreTolerances {
    double size_pct = 2.0;
    double bearing_deg = 1.0;
    double px_per_cm_pct = 1.0;
    double required_fraction = 0.95;
};

struct AttributeScore {
    std::string name;
    std::string unit;  // "%" or "deg"
    std::vector<double> deviations;  // one per truth value; NaN when missing
    double tolerance = 0.0;
    double fraction_within = 0.0;
    double max_deviation = 0.0;
    bool pass = false;
};

struct ScoreReport {
    int truth_graves = 0;
    int matched = 0;
    std::vector<AttributeScore> attributes;
    BaselineComparison comparison;
    bool pass = false;

    const AttributeScore* attribute(std::string_view name) const;
};

/// Matches rows to truth by grave id. px_per_cm is scored only when the
/// rows carry it (JSON exports). Throws NoMatchedGraves.
ScoreReport score_against_truth(const std::vector<ExportRow>& rows, const std::vector<TruthPage>& truth,
                                const ScoreTolerances& tolerances = {});

nlohmann::json report_json(const ScoreReport& report);

}  // namespace gravekit
