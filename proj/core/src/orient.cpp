#include "gravekit/orient.hpp"

#include "gravekit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gravekit {

std::string_view to_string(NorthSource source) noexcept {
    switch (source) {
        case NorthSource::Classifier: return "classifier";
        case NorthSource::Geometric: return "geometric";
        case NorthSource::Manual: return "manual";
    }
    return "manual";
}

double wrap_degrees(double degrees, double period) noexcept {
    double r = std::fmod(degrees, period);
    if (r < 0.0) r += period;
    if (r >= period) r -= period;
    return r;
}

int angle_bin(double angle_deg) noexcept {
    const int bin = static_cast<int>(std::lround(wrap_degrees(angle_deg, 360.0) / 10.0)) * 10;
    return bin % 360;
}

NorthArrow make_north_arrow(std::string detection_id, double angle_deg, NorthSource source) {
    NorthArrow n;
    n.detection_id = std::move(detection_id);
    n.angle_deg = wrap_degrees(angle_deg, 360.0);
    n.bin_deg = angle_bin(n.angle_deg);
    n.source = source;
    return n;
}

double image_angle(Point2d v) {
    if (v.x == 0.0 && v.y == 0.0) throw Error(ErrorCode::ZeroVector, "direction of a zero vector");
    return direction_angle_deg(v.x, v.y);
}

NorthArrow geometric_north(const GrayImage& crop, std::string detection_id) {
    const GrayImage ink = binarize(crop);
    double n = 0.0, sx = 0.0, sy = 0.0;
    for (int y = 0; y < ink.height(); ++y) {
        for (int x = 0; x < ink.width(); ++x) {
            if (ink.at(x, y) == 0) continue;
            n += 1.0;
            sx += x;
            sy += y;
        }
    }
    if (n == 0.0) throw Error(ErrorCode::NoContours, "blank arrow crop");
    const double mx = sx / n;
    const double my = sy / n;
    double cxx = 0.0, cyy = 0.0, cxy = 0.0;
    for (int y = 0; y < ink.height(); ++y) {
        for (int x = 0; x < ink.width(); ++x) {
            if (ink.at(x, y) == 0) continue;
            const double dx = x - mx;
            const double dy = y - my;
            cxx += dx * dx;
            cyy += dy * dy;
            cxy += dx * dy;
        }
    }
    // Major eigenvector of the 2x2 covariance.
    const double theta = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
    const Point2d axis{std::cos(theta), std::sin(theta)};

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int y = 0; y < ink.height(); ++y) {
        for (int x = 0; x < ink.width(); ++x) {
            if (ink.at(x, y) == 0) continue;
            const double t = (x - mx) * axis.x + (y - my) * axis.y;
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    }
    const double mid = (lo + hi) / 2.0;
    double forward = 0.0, backward = 0.0;
    for (int y = 0; y < ink.height(); ++y) {
        for (int x = 0; x < ink.width(); ++x) {
            if (ink.at(x, y) == 0) continue;
            const double t = (x - mx) * axis.x + (y - my) * axis.y;
            if (t > mid) forward += 1.0;
            else if (t < mid) backward += 1.0;
        }
    }
    const Point2d tip = forward >= backward ? axis : axis * -1.0;
    const double snapped = angle_bin(direction_angle_deg(tip.x, tip.y));
    return make_north_arrow(std::move(detection_id), snapped, NorthSource::Geometric);
}

NorthArrow north_angle(const GrayImage& crop, NorthStrategy strategy, std::string detection_id,
                       const ArrowClassifier& classifier) {
    if (strategy == NorthStrategy::Classifier && classifier) {
        try {
            const int bin = classifier(crop);
            if (bin < 0 || bin > 35) throw Error(ErrorCode::AdapterFailure, "bin out of range");
            return make_north_arrow(std::move(detection_id), bin * 10.0, NorthSource::Classifier);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::AdapterFailure) throw;
        }
    }
    return geometric_north(crop, std::move(detection_id));
}

Bearing skeleton_bearing(const SpineArrow& spine, const NorthArrow& north) {
    const double skull = image_angle(spine.end - spine.start);
    return {wrap_degrees(skull - north.angle_deg, 360.0), BearingKind::Skeleton};
}

Bearing grave_bearing(const RotatedRect& rect, const NorthArrow& north) {
    return {wrap_degrees(rect.angle_deg - north.angle_deg, 180.0), BearingKind::GraveAxis};
}

std::vector<int> rose_histogram(std::span<const double> skeleton_bearings_deg, int sector_deg) {
    if (sector_deg <= 0 || 360 % sector_deg != 0) {
        throw Error(ErrorCode::InvalidSector, std::to_string(sector_deg) + " does not divide 360");
    }
    std::vector<int> counts(static_cast<std::size_t>(360 / sector_deg), 0);
    for (double b : skeleton_bearings_deg) {
        const auto k = static_cast<std::size_t>(wrap_degrees(b, 360.0) / sector_deg);
        ++counts[std::min(k, counts.size() - 1)];
    }
    return counts;
}

}  // namespace gravekit
