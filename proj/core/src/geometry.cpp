#include "gravekit/geometry.hpp"

#include "gravekit/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace gravekit {

double dot(Point2d a, Point2d b) noexcept { return a.x * b.x + a.y * b.y; }
double cross(Point2d a, Point2d b) noexcept { return a.x * b.y - a.y * b.x; }
double norm(Point2d a) noexcept { return std::hypot(a.x, a.y); }

double direction_angle_deg(double dx, double dy) noexcept {
    double deg = std::atan2(dx, -dy) * 180.0 / std::numbers::pi;
    if (deg < 0.0) deg += 360.0;
    // atan2 of a tiny negative can round to exactly 360 after the shift.
    if (deg >= 360.0) deg -= 360.0;
    return deg;
}

Point2d rotate_point(Point2d p, double degrees, Point2d center) noexcept {
    const double rad = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(rad);
    const double s = std::sin(rad);
    const Point2d d = p - center;
    return {center.x + d.x * c - d.y * s, center.y + d.x * s + d.y * c};
}

Contour make_contour(std::vector<Point2d> points) {
    Contour c;
    c.orientation = signed_area(points) > 0.0 ? Orientation::CW : Orientation::CCW;
    c.points = std::move(points);
    return c;
}

Point2d RotatedRect::length_axis() const noexcept {
    const double rad = angle_deg * std::numbers::pi / 180.0;
    return {std::sin(rad), -std::cos(rad)};
}

std::array<Point2d, 4> RotatedRect::corners() const noexcept {
    const Point2d u = length_axis();
    const Point2d v{-u.y, u.x};
    const Point2d hu = u * (length_px / 2.0);
    const Point2d hv = v * (width_px / 2.0);
    return {center - hu - hv, center + hu - hv, center + hu + hv, center - hu + hv};
}

GrayImage binarize(const GrayImage& gray, int threshold, int max_value) {
    GrayImage out(gray.width(), gray.height());
    const auto src = gray.pixels();
    auto dst = out.pixels();
    const auto on = static_cast<std::uint8_t>(max_value);
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = (255 - static_cast<int>(src[i])) > threshold ? on : std::uint8_t{0};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Suzuki-Abe border following (8-connected foreground).
// ---------------------------------------------------------------------------

namespace {

// Neighbour offsets, counter-clockwise on screen starting east.
constexpr int kDRow[8] = {0, -1, -1, -1, 0, 1, 1, 1};
constexpr int kDCol[8] = {1, 1, 0, -1, -1, -1, 0, 1};

int direction_of(int from_r, int from_c, int to_r, int to_c) {
    const int dr = to_r - from_r;
    const int dc = to_c - from_c;
    for (int d = 0; d < 8; ++d) {
        if (kDRow[d] == dr && kDCol[d] == dc) return d;
    }
    return -1;
}

struct BorderInfo {
    bool is_hole = false;
    int parent = 0;
};

std::vector<Point2d> compress_runs(const std::vector<std::pair<int, int>>& raw) {
    std::vector<Point2d> out;
    const std::size_t n = raw.size();
    if (n <= 2) {
        for (const auto& [r, c] : raw) out.push_back({static_cast<double>(c), static_cast<double>(r)});
        return out;
    }
    auto dir = [&](std::size_t a, std::size_t b) {
        return direction_of(raw[a].first, raw[a].second, raw[b].first, raw[b].second);
    };
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t prev = (k + n - 1) % n;
        const std::size_t next = (k + 1) % n;
        if (dir(prev, k) != dir(k, next)) {
            out.push_back({static_cast<double>(raw[k].second), static_cast<double>(raw[k].first)});
        }
    }
    return out;
}

}  // namespace

std::vector<Contour> trace_outer_contours(const GrayImage& binary, ChainApprox approx) {
    const int rows = binary.height() + 2;
    const int cols = binary.width() + 2;
    std::vector<std::int32_t> f(static_cast<std::size_t>(rows) * cols, 0);
    auto at = [&](int r, int c) -> std::int32_t& { return f[static_cast<std::size_t>(r) * cols + c]; };
    for (int y = 0; y < binary.height(); ++y) {
        for (int x = 0; x < binary.width(); ++x) {
            if (binary.at(x, y) != 0) at(y + 1, x + 1) = 1;
        }
    }

    // Border 1 is the frame, which behaves as a hole border.
    std::vector<BorderInfo> borders(2);
    borders[1] = {true, 0};
    std::vector<Contour> result;
    std::int32_t nbd = 1;

    for (int i = 1; i < rows - 1; ++i) {
        std::int32_t lnbd = 1;
        for (int j = 1; j < cols - 1; ++j) {
            const std::int32_t fij = at(i, j);
            if (fij == 0) continue;

            bool start = false;
            bool hole = false;
            int from_r = i;
            int from_c = j;
            if (fij == 1 && at(i, j - 1) == 0) {
                start = true;
                from_c = j - 1;
            } else if (fij >= 1 && at(i, j + 1) == 0) {
                start = true;
                hole = true;
                from_c = j + 1;
                if (fij > 1) lnbd = fij;
            }

            if (start) {
                ++nbd;
                const BorderInfo& prior = borders[static_cast<std::size_t>(lnbd)];
                BorderInfo info;
                info.is_hole = hole;
                info.parent = (hole == prior.is_hole) ? prior.parent : lnbd;
                borders.push_back(info);

                std::vector<std::pair<int, int>> raw;
                const bool keep = !hole && info.parent == 1;

                // 3.1: clockwise search from the entry neighbour.
                const int d0 = direction_of(i, j, from_r, from_c);
                int d1 = -1;
                for (int k = 0; k < 8; ++k) {
                    const int d = (d0 - k + 8) % 8;
                    if (at(i + kDRow[d], j + kDCol[d]) != 0) {
                        d1 = d;
                        break;
                    }
                }
                if (d1 < 0) {
                    at(i, j) = -nbd;
                    raw.emplace_back(i, j);
                } else {
                    const int r1 = i + kDRow[d1];
                    const int c1 = j + kDCol[d1];
                    int r2 = r1, c2 = c1;
                    int r3 = i, c3 = j;
                    while (true) {
                        if (keep) raw.emplace_back(r3, c3);
                        // 3.3: counter-clockwise search starting after (r2, c2).
                        const int back = direction_of(r3, c3, r2, c2);
                        bool east_zero = false;
                        int r4 = r2, c4 = c2;
                        for (int k = 1; k <= 8; ++k) {
                            const int d = (back + k) % 8;
                            const int rr = r3 + kDRow[d];
                            const int cc = c3 + kDCol[d];
                            if (at(rr, cc) != 0) {
                                r4 = rr;
                                c4 = cc;
                                break;
                            }
                            if (d == 0) east_zero = true;
                        }
                        // 3.4
                        if (east_zero) {
                            at(r3, c3) = -nbd;
                        } else if (at(r3, c3) == 1) {
                            at(r3, c3) = nbd;
                        }
                        // 3.5
                        if (r4 == i && c4 == j && r3 == r1 && c3 == c1) break;
                        r2 = r3;
                        c2 = c3;
                        r3 = r4;
                        c3 = c4;
                    }
                }

                if (keep) {
                    // Shift back from padded coordinates.
                    for (auto& [r, c] : raw) {
                        --r;
                        --c;
                    }
                    std::vector<Point2d> pts;
                    if (approx == ChainApprox::Simple) {
                        pts = compress_runs(raw);
                    } else {
                        pts.reserve(raw.size());
                        for (const auto& [r, c] : raw) {
                            pts.push_back({static_cast<double>(c), static_cast<double>(r)});
                        }
                    }
                    result.push_back(make_contour(std::move(pts)));
                }
            }

            // 4
            const std::int32_t now = at(i, j);
            if (now != 1) lnbd = std::abs(now);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double signed_area(std::span<const Point2d> points) noexcept {
    const std::size_t n = points.size();
    if (n < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2d& a = points[i];
        const Point2d& b = points[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    return twice / 2.0;
}

double closed_arc_length(std::span<const Point2d> points) noexcept {
    const std::size_t n = points.size();
    if (n < 2) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += norm(points[(i + 1) % n] - points[i]);
    return total;
}

PolygonMetrics polygon_metrics(const Contour& contour) {
    if (contour.points.size() < 3) {
        throw Error(ErrorCode::DegenerateContour, "polygon needs at least 3 points");
    }
    return {std::abs(signed_area(contour.points)), closed_arc_length(contour.points)};
}

const Contour& largest_contour(std::span<const Contour> contours) {
    if (contours.empty()) throw Error(ErrorCode::NoContours, "no contours to choose from");
    std::size_t best = 0;
    double best_len = closed_arc_length(contours[0].points);
    double best_area = std::abs(signed_area(contours[0].points));
    for (std::size_t i = 1; i < contours.size(); ++i) {
        const double len = closed_arc_length(contours[i].points);
        const double area = std::abs(signed_area(contours[i].points));
        if (len > best_len || (len == best_len && area > best_area)) {
            best = i;
            best_len = len;
            best_area = area;
        }
    }
    return contours[best];
}

// ---------------------------------------------------------------------------
// Convex hull and rotating calipers
// ---------------------------------------------------------------------------

std::vector<Point2d> convex_hull(std::span<const Point2d> points) {
    std::vector<Point2d> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](Point2d a, Point2d b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;

    std::vector<Point2d> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Point2d& p : pts) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = pts.size() - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

RotatedRect min_area_rect(std::span<const Point2d> points) {
    const std::vector<Point2d> hull = convex_hull(points);
    const std::size_t n = hull.size();
    if (n < 3) throw Error(ErrorCode::DegenerateContour, "points are collinear");

    auto at = [&](std::size_t i) -> const Point2d& { return hull[i % n]; };

    double best_area = std::numeric_limits<double>::infinity();
    RotatedRect best;
    std::size_t right = 0, top = 0, left = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2d origin = at(i);
        const Point2d edge = at(i + 1) - origin;
        const Point2d u = edge * (1.0 / norm(edge));
        const Point2d v{-u.y, u.x};  // hull is CCW (y-up), so interior is on +v

        if (i == 0) right = i + 1;
        for (std::size_t s = 0; s < n && dot(at(right + 1) - at(right), u) > 0.0; ++s) ++right;
        if (i == 0) top = right;
        for (std::size_t s = 0; s < n && dot(at(top + 1) - at(top), v) > 0.0; ++s) ++top;
        if (i == 0) left = top;
        for (std::size_t s = 0; s < n && dot(at(left + 1) - at(left), u) < 0.0; ++s) ++left;

        const double max_u = dot(at(right) - origin, u);
        const double min_u = dot(at(left) - origin, u);
        const double height = dot(at(top) - origin, v);
        const double len_u = max_u - min_u;
        const double area = len_u * height;
        if (area < best_area) {
            best_area = area;
            best.center = origin + u * ((max_u + min_u) / 2.0) + v * (height / 2.0);
            const Point2d axis = len_u >= height ? u : v;
            best.length_px = std::max(len_u, height);
            best.width_px = std::min(len_u, height);
            double angle = direction_angle_deg(axis.x, axis.y);
            if (angle >= 180.0) angle -= 180.0;
            best.angle_deg = angle;
        }
    }
    if (!(best.width_px > 0.0)) throw Error(ErrorCode::DegenerateContour, "zero-width rectangle");
    return best;
}

RotatedRect min_area_rect(const Contour& contour) { return min_area_rect(contour.points); }

}  // namespace gravekit
