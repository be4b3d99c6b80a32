#pragma once

#include "gravekit/detect.hpp"

#include <optional>
#include <vector>

namespace gravekit {

/// One grave and everything drawn for it on the same page.
struct GraveTree {
    Detection grave;
    std::optional<Detection> scale;
    std::optional<Detection> north_arrow;
    std::optional<Detection> cross_section;
    std::vector<Detection> skeletons;
    std::vector<Detection> artefacts;

    bool operator==(const GraveTree&) const = default;
};

/// Distance between bbox centres. Throws PageMismatch across pages.
double bbox_center_distance(const Detection& a, const Detection& b);

/// Minimum fraction of an object's box that must overlap the grave box.
inline constexpr double kContainmentOverlap = 0.9;

/// True when at least 90% of `object`'s box lies inside `container` and its
/// centre is inside `container` (edges inclusive).
bool contained_in(const BBox& object, const BBox& container) noexcept;

/// Reading order used for trees and ties: (y_min, x_min, y_max, x_max, id).
bool reading_order_less(const Detection& a, const Detection& b) noexcept;

/// Builds one tree per grave detection on a single page. Scale, arrow and
/// cross-section go to the grave with the nearest centre, possibly several
/// graves sharing one. Skeletons and artefacts join every grave that
/// contains them. Trees come back in reading order of their grave boxes.
std::vector<GraveTree> assemble_graves(const std::vector<Detection>& page_detections);

}  // namespace gravekit
