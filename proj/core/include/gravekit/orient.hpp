#pragma once

#include "gravekit/geometry.hpp"
#include "gravekit/image.hpp"

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Bearings are compass degrees: 0 = North, 90 = East, clockwise. They are
// computed from image angles (clockwise from image-up, see geometry.hpp)
// relative to the drawn north arrow.

namespace gravekit {

enum class NorthSource { Classifier, Geometric, Manual };

std::string_view to_string(NorthSource source) noexcept;

struct NorthArrow {
    std::string detection_id;
    double angle_deg = 0.0;  // image angle the arrow points to, [0, 360)
    int bin_deg = 0;         // nearest multiple of 10, [0, 350]
    NorthSource source = NorthSource::Manual;

    bool operator==(const NorthArrow&) const = default;
};

/// Normalises the angle and fills in the 10-degree bin.
NorthArrow make_north_arrow(std::string detection_id, double angle_deg, NorthSource source);

/// round(angle / 10) * 10 mod 360.
int angle_bin(double angle_deg) noexcept;

/// Directed spine from pelvis (start) to skull (end), in page pixels.
struct SpineArrow {
    Point2d start;
    Point2d end;

    bool operator==(const SpineArrow&) const = default;
};

enum class BearingKind {
    Skeleton,   // directed, [0, 360)
    GraveAxis,  // undirected, [0, 180)
};

struct Bearing {
    double degrees = 0.0;
    BearingKind kind = BearingKind::Skeleton;
};

/// Wraps into [0, period).
double wrap_degrees(double degrees, double period) noexcept;

/// Clockwise-from-up angle of an image vector. Throws ZeroVector.
double image_angle(Point2d v);

enum class NorthStrategy { Classifier, Geometric };

/// Returns a bin index 0..35 for an arrow crop, or throws AdapterFailure.
using ArrowClassifier = std::function<int(const GrayImage& crop)>;

/// Geometric estimate: principal axis of the ink, pointed towards the half
/// carrying more ink (the arrowhead), snapped to the 10-degree bin.
NorthArrow geometric_north(const GrayImage& crop, std::string detection_id);

/// Classifier strategy defers to `classifier` and falls back to the
/// geometric estimate when it is missing or fails.
NorthArrow north_angle(const GrayImage& crop, NorthStrategy strategy, std::string detection_id = {},
                       const ArrowClassifier& classifier = {});

Bearing skeleton_bearing(const SpineArrow& spine, const NorthArrow& north);
Bearing grave_bearing(const RotatedRect& rect, const NorthArrow& north);

/// Sector k counts bearings in [k*s, (k+1)*s). Throws InvalidSector unless
/// `sector_deg` divides 360.
std::vector<int> rose_histogram(std::span<const double> skeleton_bearings_deg, int sector_deg = 10);

}  // namespace gravekit
