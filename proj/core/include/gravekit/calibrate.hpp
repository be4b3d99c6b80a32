#pragma once

#include "gravekit/image.hpp"

#include <string>
#include <string_view>

namespace gravekit {

enum class ConversionSource { ScaleBar, FixedRatio, Manual };

std::string_view to_string(ConversionSource source) noexcept;

struct Conversion {
    double px_per_cm = 0.0;
    ConversionSource source = ConversionSource::ScaleBar;

    bool operator==(const Conversion&) const = default;
};

struct ScaleBar {
    std::string detection_id;
    double pixel_length = 0.0;
    std::string label_text;
    double real_length_cm = 0.0;
    double px_per_cm = 0.0;
};

/// A parsed scale annotation: either a drawn length or a drawing ratio 1:n.
struct ScaleLabel {
    enum class Kind { Length, Ratio };
    Kind kind = Kind::Length;
    double value = 0.0;  // centimetres for Length, n for Ratio

    bool operator==(const ScaleLabel&) const = default;
};

/// Share of the union extent the largest contour must cover before tick
/// segments are measured as a whole.
inline constexpr double kSegmentedBarCoverage = 0.6;

/// Pixel length of a scale bar crop: the long side of the min-area rect of
/// the largest contour, or the union extent of all contours when the largest
/// one covers less than 60% of it (bars drawn as separate ticks).
double measure_scale_pixels(const GrayImage& crop);

/// Accepts "<number> <unit>" (mm, cm, m; decimal point or comma), ranges
/// such as "0-1 m" (the span is taken), and ratios "1:<n>" with an optional
/// "M" prefix. Throws UnparseableLabel, keeping the raw text in the message.
ScaleLabel parse_scale_label(std::string_view text);

Conversion conversion_from_scale_bar(double pixel_length, double real_length_cm);
Conversion conversion_from_fixed_ratio(double page_height_px, double page_height_cm, double ratio);
Conversion conversion_manual(double px_per_cm);

/// Parses the label and fills in the derived fields. Ratio labels are
/// rejected here because a bar alone cannot express a drawing ratio.
ScaleBar make_scale_bar(std::string detection_id, double pixel_length, std::string label_text);

}  // namespace gravekit
