#include "gravekit/calibrate.hpp"

#include "gravekit/error.hpp"
#include "gravekit/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <regex>

namespace gravekit {

std::string_view to_string(ConversionSource source) noexcept {
    switch (source) {
        case ConversionSource::ScaleBar: return "scale_bar";
        case ConversionSource::FixedRatio: return "fixed_ratio";
        case ConversionSource::Manual: return "manual";
    }
    return "manual";
}

namespace {

// Long side of the min-area rect, or the segment length for collinear points.
double extent_length(std::span<const Point2d> points) {
    try {
        return min_area_rect(points).length_px;
    } catch (const Error&) {
        const std::vector<Point2d> hull = convex_hull(points);
        return hull.size() == 2 ? norm(hull[1] - hull[0]) : 0.0;
    }
}

}  // namespace

double measure_scale_pixels(const GrayImage& crop) {
    const std::vector<Contour> contours = trace_outer_contours(binarize(crop));
    if (contours.empty()) throw Error(ErrorCode::NoContours, "blank scale crop");

    const double own = extent_length(largest_contour(contours).points);
    std::vector<Point2d> all;
    for (const Contour& c : contours) all.insert(all.end(), c.points.begin(), c.points.end());
    const double union_length = extent_length(all);
    return own < kSegmentedBarCoverage * union_length ? union_length : own;
}

namespace {

std::string normalize_label(std::string_view text) {
    std::string s;
    s.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        // U+2013 / U+2014 / U+2212 dashes arrive as 3-byte UTF-8 sequences.
        if (c == 0xE2 && i + 2 < text.size()) {
            const auto b1 = static_cast<unsigned char>(text[i + 1]);
            const auto b2 = static_cast<unsigned char>(text[i + 2]);
            if ((b1 == 0x80 && (b2 == 0x93 || b2 == 0x94)) || (b1 == 0x88 && b2 == 0x92)) {
                s.push_back('-');
                i += 2;
                continue;
            }
        }
        s.push_back(static_cast<char>(std::tolower(c)));
    }
    const auto first = s.find_first_not_of(" \t\r\n");
    const auto last = s.find_last_not_of(" \t\r\n");
    return first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
}

double parse_number(std::string token) {
    std::replace(token.begin(), token.end(), ',', '.');
    double value = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) return std::nan("");
    return value;
}

double to_cm(double value, const std::string& unit) {
    if (unit == "mm") return value / 10.0;
    if (unit == "cm") return value;
    return value * 100.0;
}

}  // namespace

ScaleLabel parse_scale_label(std::string_view text) {
    static const std::regex ratio_re(R"(^(?:m\.?\s*)?1\s*:\s*([0-9]+(?:[.,][0-9]+)?)$)");
    static const std::regex range_re(
        R"(^([0-9]+(?:[.,][0-9]+)?)\s*(mm|cm|m)?\s*-\s*([0-9]+(?:[.,][0-9]+)?)\s*(mm|cm|m)$)");
    static const std::regex length_re(R"(^([0-9]+(?:[.,][0-9]+)?)\s*(mm|cm|m)$)");

    const std::string s = normalize_label(text);
    std::smatch m;
    ScaleLabel out;
    if (std::regex_match(s, m, ratio_re)) {
        out.kind = ScaleLabel::Kind::Ratio;
        out.value = parse_number(m[1]);
    } else if (std::regex_match(s, m, range_re)) {
        const std::string hi_unit = m[4];
        const std::string lo_unit = m[2].matched ? std::string(m[2]) : hi_unit;
        out.value = std::abs(to_cm(parse_number(m[3]), hi_unit) - to_cm(parse_number(m[1]), lo_unit));
    } else if (std::regex_match(s, m, length_re)) {
        out.value = to_cm(parse_number(m[1]), m[2]);
    } else {
        throw Error(ErrorCode::UnparseableLabel, "'" + std::string(text) + "'");
    }
    if (!(out.value > 0.0) || !std::isfinite(out.value)) {
        throw Error(ErrorCode::UnparseableLabel, "'" + std::string(text) + "'");
    }
    return out;
}

Conversion conversion_from_scale_bar(double pixel_length, double real_length_cm) {
    if (!(pixel_length > 0.0) || !(real_length_cm > 0.0)) {
        throw Error(ErrorCode::NonPositiveInput, "scale bar needs positive pixel and real lengths");
    }
    return {pixel_length / real_length_cm, ConversionSource::ScaleBar};
}

Conversion conversion_from_fixed_ratio(double page_height_px, double page_height_cm, double ratio) {
    if (!(page_height_px > 0.0) || !(page_height_cm > 0.0) || !(ratio > 0.0)) {
        throw Error(ErrorCode::NonPositiveInput, "fixed ratio needs positive page height and ratio");
    }
    return {page_height_px / (page_height_cm * ratio), ConversionSource::FixedRatio};
}

Conversion conversion_manual(double px_per_cm) {
    if (!(px_per_cm > 0.0)) throw Error(ErrorCode::NonPositiveInput, "px_per_cm must be positive");
    return {px_per_cm, ConversionSource::Manual};
}

ScaleBar make_scale_bar(std::string detection_id, double pixel_length, std::string label_text) {
    const ScaleLabel label = parse_scale_label(label_text);
    if (label.kind != ScaleLabel::Kind::Length) {
        throw Error(ErrorCode::UnparseableLabel, "'" + label_text + "' is a ratio, not a bar length");
    }
    const Conversion conv = conversion_from_scale_bar(pixel_length, label.value);
    return {std::move(detection_id), pixel_length, std::move(label_text), label.value, conv.px_per_cm};
}

}  // namespace gravekit
