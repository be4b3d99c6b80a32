#pragma once

#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gravekit {

enum class ClassLabel {
    text,
    skeleton_photo,
    ceramics,
    artefact,
    grave_photo,
    map,
    scale,
    arrow,
    grave,
    skeleton,
    grave_artefact,
    grave_cross_section,
    stone_tool,
    shaft_axe,
    table,
};

std::string_view to_string(ClassLabel label) noexcept;
std::optional<ClassLabel> parse_label(std::string_view text) noexcept;
bool is_artefact_label(ClassLabel label) noexcept;

enum class DetectionOrigin { Model, Manual, Synthetic };

std::string_view to_string(DetectionOrigin origin) noexcept;

/// Pixel box, origin top-left, y down.
struct BBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const noexcept { return x_max - x_min; }
    double height() const noexcept { return y_max - y_min; }
    double area() const noexcept { return width() * height(); }
    double center_x() const noexcept { return (x_min + x_max) / 2.0; }
    double center_y() const noexcept { return (y_min + y_max) / 2.0; }

    bool operator==(const BBox&) const = default;
};

struct Detection {
    std::string id;
    std::string page_id;
    ClassLabel label = ClassLabel::text;
    BBox bbox;
    double confidence = 1.0;
    DetectionOrigin origin = DetectionOrigin::Model;

    bool operator==(const Detection&) const = default;
};

/// Maps foreign label spellings onto the canonical vocabulary before
/// validation. Empty by default; `with_alternative_names` adds the names
/// used by the alternative detector training set ("burial" and friends).
struct LabelAliases {
    std::map<std::string, ClassLabel, std::less<>> aliases;

    static LabelAliases with_alternative_names();
};

struct PageSize {
    int width_px = 0;
    int height_px = 0;
};

struct ParseOptions {
    LabelAliases aliases;
    /// Used for records without a `page_id` key (adapter output for a single page).
    std::optional<std::string> default_page_id;
};

using PageLookup = std::function<std::optional<PageSize>(std::string_view page_id)>;

/// Reads detection JSON lines. Blank lines are skipped. Missing ids are
/// assigned as "<page_id>#<n>" with n counting per page in stream order.
std::vector<Detection> parse_detections(std::istream& in, const PageLookup& pages,
                                        const ParseOptions& options = {});

/// One JSON object per line, including `id` and `origin` so that parsing the
/// output reproduces the input exactly.
std::string serialize_detections(const std::vector<Detection>& detections);

/// Keeps detections with confidence >= threshold, in input order.
std::vector<Detection> filter_by_confidence(const std::vector<Detection>& detections,
                                            double threshold = 0.8);

}  // namespace gravekit
