#pragma once

#include "gravekit/image.hpp"

#include <array>
#include <span>
#include <vector>

// Measurement core. Coordinates are image coordinates: origin top-left,
// x to the right, y downwards. Traced contour points sit on pixel centres,
// so pixel (col, row) is the point (col, row).
//
// Angles are degrees measured clockwise from image-up. This is the only
// angle convention in the library; orient.hpp builds on it.

namespace gravekit {

struct Point2d {
    double x = 0.0;
    double y = 0.0;

    friend Point2d operator+(Point2d a, Point2d b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend Point2d operator-(Point2d a, Point2d b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend Point2d operator*(Point2d a, double s) noexcept { return {a.x * s, a.y * s}; }
    friend bool operator==(Point2d, Point2d) = default;
};

double dot(Point2d a, Point2d b) noexcept;
double cross(Point2d a, Point2d b) noexcept;
double norm(Point2d a) noexcept;

/// Visual winding on screen (y-down).
enum class Orientation { CW, CCW };

struct Contour {
    std::vector<Point2d> points;  // closed: last connects to first
    Orientation orientation = Orientation::CCW;
};

/// Builds a contour and derives its winding from the signed area.
Contour make_contour(std::vector<Point2d> points);

struct RotatedRect {
    Point2d center;
    double width_px = 0.0;   // shorter side
    double length_px = 0.0;  // longer side
    double angle_deg = 0.0;  // image angle of the length axis, [0, 180)

    double area() const noexcept { return width_px * length_px; }
    /// Unit vector along the length axis (pointing into the upper half-plane
    /// of the angle convention, i.e. the direction `angle_deg`).
    Point2d length_axis() const noexcept;
    std::array<Point2d, 4> corners() const noexcept;
};

/// Clockwise-from-up angle of a direction vector in [0, 360). The zero
/// vector maps to 0; callers that care reject it first.
double direction_angle_deg(double dx, double dy) noexcept;

/// Rotates `p` about `center` by `degrees`, clockwise on screen.
Point2d rotate_point(Point2d p, double degrees, Point2d center = {}) noexcept;

/// Invert, then threshold: v' = (255 - v) > threshold ? max_value : 0.
GrayImage binarize(const GrayImage& gray, int threshold = 40, int max_value = 255);

enum class ChainApprox {
    None,    // every border pixel
    Simple,  // horizontal, vertical and diagonal runs reduced to their endpoints
};

/// Outermost borders of 8-connected foreground components (any nonzero
/// pixel), traced with Suzuki-Abe border following. Components nested in a
/// hole of another component are not reported. Contours of tiny components
/// can have one or two points.
std::vector<Contour> trace_outer_contours(const GrayImage& binary,
                                          ChainApprox approx = ChainApprox::Simple);

struct PolygonMetrics {
    double area_px2 = 0.0;
    double arc_length_px = 0.0;
};

double signed_area(std::span<const Point2d> points) noexcept;
double closed_arc_length(std::span<const Point2d> points) noexcept;

/// Shoelace area (absolute) and closed perimeter. Throws DegenerateContour
/// below three points.
PolygonMetrics polygon_metrics(const Contour& contour);

/// Contour with the longest closed perimeter; ties go to the larger area,
/// then to the earlier contour. Throws NoContours on an empty list.
const Contour& largest_contour(std::span<const Contour> contours);

/// Convex hull, counter-clockwise in y-up terms, without collinear points.
std::vector<Point2d> convex_hull(std::span<const Point2d> points);

/// Minimum-area enclosing rectangle by rotating calipers over the convex
/// hull. Throws DegenerateContour when the points are collinear.
RotatedRect min_area_rect(std::span<const Point2d> points);
RotatedRect min_area_rect(const Contour& contour);

}  // namespace gravekit
