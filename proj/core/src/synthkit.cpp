#include "gravekit/synthkit.hpp"

#include "gravekit/assemble.hpp"
#include "gravekit/error.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace gravekit {

void SynthParams::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidParams, msg); };
    if (width_px < 1600 || height_px < 1200) fail("page must be at least 1600 x 1200 px");
    if (graves_min < 1 || graves_max > 4 || graves_min > graves_max) fail("graves per page must lie in 1..4");
    if (!(grave_width_min_cm >= 50.0 && grave_width_min_cm <= grave_width_max_cm)) fail("bad grave width range");
    if (!(grave_length_max_cm <= 250.0 && grave_length_max_cm >= std::max(1.3 * grave_width_max_cm, 80.0))) {
        fail("grave length range must fit 1.3 x width and stay within 250 cm");
    }
    if (!(depth_min_cm > 0.0 && depth_min_cm <= depth_max_cm)) fail("bad depth range");
    if (!(px_per_cm_min > 0.0 && px_per_cm_min <= px_per_cm_max)) fail("bad px_per_cm range");
    // Keep the largest rotated grave inside its cell.
    const double cell = std::min(width_px / 2.0 - 440.0, (height_px - 340.0) / 2.0 - 20.0);
    if (std::hypot(grave_length_max_cm, grave_width_max_cm) * px_per_cm_max + 4.0 > cell) {
        fail("graves do not fit the page at this px_per_cm");
    }
    for (double p : {arrow_probability, speckle_density, stroke_break_probability, drop_probability}) {
        if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must lie in [0, 1]");
    }
    if (!(bbox_perturbation >= 0.0 && bbox_perturbation < 0.5)) fail("bbox_perturbation must lie in [0, 0.5)");
    if (!(jitter_px >= 0.0 && jitter_px <= 10.0)) fail("jitter_px must lie in [0, 10]");
}

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int integer(int lo, int hi) {  // inclusive
        const int v = lo + static_cast<int>(uniform() * (hi - lo + 1));
        return std::min(v, hi);
    }
    bool chance(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

/// Smooth periodic noise on [0, 1) with values in [-1, 1].
class LoopNoise {
public:
    LoopNoise(Rng& rng, int knots) : values_(static_cast<std::size_t>(knots)) {
        for (double& v : values_) v = rng.uniform(-1.0, 1.0);
    }
    double operator()(double s) const {
        const double x = (s - std::floor(s)) * static_cast<double>(values_.size());
        const auto i = static_cast<std::size_t>(x) % values_.size();
        const double f = x - std::floor(x);
        const double w = (1.0 - std::cos(kPi * f)) / 2.0;
        return values_[i] * (1.0 - w) + values_[(i + 1) % values_.size()] * w;
    }

private:
    std::vector<double> values_;
};

/// Collects the pixel bounds of one drawn object.
struct Ink {
    int x_min = std::numeric_limits<int>::max();
    int y_min = std::numeric_limits<int>::max();
    int x_max = std::numeric_limits<int>::min();
    int y_max = std::numeric_limits<int>::min();

    void add(int x, int y) {
        x_min = std::min(x_min, x);
        y_min = std::min(y_min, y);
        x_max = std::max(x_max, x);
        y_max = std::max(y_max, y);
    }
    BBox bbox() const {
        return {static_cast<double>(x_min), static_cast<double>(y_min), static_cast<double>(x_max + 1),
                static_cast<double>(y_max + 1)};
    }
};

void plot(GrayImage& page, Ink& ink, int x, int y) {
    if (x < 0 || y < 0 || x >= page.width() || y >= page.height()) return;
    page.at(x, y) = 0;
    ink.add(x, y);
}

/// Pixel centres inside the polygon (even-odd), as a mask over `box`.
std::vector<std::uint8_t> fill_mask(const std::vector<Point2d>& poly, const PixelRect& box) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(box.width()) * static_cast<std::size_t>(box.height()), 0);
    std::vector<double> xs;
    for (int y = box.y0; y < box.y1; ++y) {
        xs.clear();
        const double yc = y;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Point2d a = poly[i];
            const Point2d b = poly[(i + 1) % poly.size()];
            if ((a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y)) {
                xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const int x0 = std::max(box.x0, static_cast<int>(std::ceil(xs[k])));
            const int x1 = std::min(box.x1 - 1, static_cast<int>(std::floor(xs[k + 1])));
            for (int x = x0; x <= x1; ++x) {
                mask[static_cast<std::size_t>(y - box.y0) * static_cast<std::size_t>(box.width()) +
                     static_cast<std::size_t>(x - box.x0)] = 1;
            }
        }
    }
    return mask;
}

/// Pixels whose (2r+1)^2 neighbourhood lies entirely in the mask.
std::vector<std::uint8_t> erode(const std::vector<std::uint8_t>& mask, int w, int h, int r) {
    auto pass = [r](const std::vector<std::uint8_t>& in, int w, int h, bool rows) {
        std::vector<std::uint8_t> out(in.size(), 0);
        const int lines = rows ? h : w;
        const int len = rows ? w : h;
        std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
        for (int l = 0; l < lines; ++l) {
            auto at = [&](int i) -> std::size_t {
                return rows ? static_cast<std::size_t>(l) * w + i : static_cast<std::size_t>(i) * w + l;
            };
            for (int i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + in[at(i)];
            for (int i = 0; i < len; ++i) {
                if (i - r < 0 || i + r >= len) continue;
                if (prefix[i + r + 1] - prefix[i - r] == 2 * r + 1) out[at(i)] = 1;
            }
        }
        return out;
    };
    return pass(pass(mask, w, h, true), w, h, false);
}

Point2d to_page(Point2d c, double theta_deg, double u, double v) {
    const double t = theta_deg * kPi / 180.0;
    const double ct = std::cos(t);
    const double st = std::sin(t);
    // u along the width axis, v along the length axis (image angle theta).
    return {c.x + u * ct + v * st, c.y + u * st - v * ct};
}

/// Rounded rectangle with inward jitter that leaves the middle of every side
/// untouched, so the enclosing rectangle is the undistorted one.
std::vector<std::pair<double, double>> grave_outline_local(double a, double b, double radius, double jitter,
                                                           Rng& rng) {
    const LoopNoise noise(rng, 16);
    struct Sample {
        double u, v, nu, nv, taper;
    };
    std::vector<Sample> samples;
    auto side = [&](double u0, double v0, double u1, double v1, double nu, double nv) {
        const double len = std::hypot(u1 - u0, v1 - v0);
        const int n = std::max(2, static_cast<int>(len / 2.0));
        for (int i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / n;
            const double taper = std::clamp((std::abs(t - 0.5) - 0.15) / 0.15, 0.0, 1.0);
            samples.push_back({u0 + (u1 - u0) * t, v0 + (v1 - v0) * t, nu, nv, taper});
        }
    };
    auto corner = [&](double cu, double cv, double phi0) {
        const int n = std::max(4, static_cast<int>(radius * kPi / 4.0));
        for (int i = 0; i < n; ++i) {
            const double phi = phi0 + kPi / 2.0 * i / n;
            samples.push_back({cu + radius * std::cos(phi), cv + radius * std::sin(phi), std::cos(phi), std::sin(phi), 1.0});
        }
    };
    const double ia = a - radius;
    const double ib = b - radius;
    side(a, -ib, a, ib, 1, 0);
    corner(ia, ib, 0.0);
    side(ia, b, -ia, b, 0, 1);
    corner(-ia, ib, kPi / 2.0);
    side(-a, ib, -a, -ib, -1, 0);
    corner(-ia, -ib, kPi);
    side(-ia, -b, ia, -b, 0, -1);
    corner(ia, -ib, 1.5 * kPi);

    std::vector<std::pair<double, double>> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        const double d = jitter * (0.5 + 0.5 * noise(static_cast<double>(i) / samples.size())) * s.taper;
        out.emplace_back(s.u - s.nu * d, s.v - s.nv * d);
    }
    return out;
}

PixelRect polygon_box(const std::vector<Point2d>& poly, int width, int height) {
    double x0 = poly[0].x, x1 = poly[0].x, y0 = poly[0].y, y1 = poly[0].y;
    for (const Point2d& p : poly) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return {std::max(0, static_cast<int>(std::floor(x0)) - 1), std::max(0, static_cast<int>(std::floor(y0)) - 1),
            std::min(width, static_cast<int>(std::ceil(x1)) + 2), std::min(height, static_cast<int>(std::ceil(y1)) + 2)};
}

double segment_distance(Point2d p, Point2d a, Point2d b) {
    const Point2d ab = b - a;
    const double len2 = dot(ab, ab);
    const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    return norm(p - (a + ab * t));
}

/// Ink every pixel centre for which `inside` holds, within the box.
template <class Pred>
void paint(GrayImage& page, Ink& ink, double x0, double y0, double x1, double y1, Pred inside) {
    const int ix0 = std::max(0, static_cast<int>(std::floor(x0)));
    const int iy0 = std::max(0, static_cast<int>(std::floor(y0)));
    const int ix1 = std::min(page.width() - 1, static_cast<int>(std::ceil(x1)));
    const int iy1 = std::min(page.height() - 1, static_cast<int>(std::ceil(y1)));
    for (int y = iy0; y <= iy1; ++y) {
        for (int x = ix0; x <= ix1; ++x) {
            if (inside(Point2d{static_cast<double>(x), static_cast<double>(y)})) plot(page, ink, x, y);
        }
    }
}

void draw_thick_segment(GrayImage& page, Ink& ink, Point2d a, Point2d b, double radius) {
    paint(page, ink, std::min(a.x, b.x) - radius, std::min(a.y, b.y) - radius, std::max(a.x, b.x) + radius,
          std::max(a.y, b.y) + radius, [&](Point2d p) { return segment_distance(p, a, b) <= radius; });
}

void draw_disc(GrayImage& page, Ink& ink, Point2d c, double r) {
    paint(page, ink, c.x - r, c.y - r, c.x + r, c.y + r, [&](Point2d p) { return norm(p - c) <= r; });
}

bool in_triangle(Point2d p, Point2d a, Point2d b, Point2d c) {
    const double d1 = cross(b - a, p - a);
    const double d2 = cross(c - b, p - b);
    const double d3 = cross(a - c, p - c);
    const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
    const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(neg && pos);
}

/// Shaft plus filled head; `angle` is the image angle of the tip.
BBox draw_arrow(GrayImage& page, Point2d center, double angle) {
    Ink ink;
    const double t = angle * kPi / 180.0;
    const Point2d dir{std::sin(t), -std::cos(t)};
    const Point2d perp{std::cos(t), std::sin(t)};
    constexpr double length = 150.0;
    constexpr double head = 50.0;
    constexpr double half_base = 22.0;
    const Point2d tail = center - dir * (length / 2.0);
    const Point2d tip = center + dir * (length / 2.0);
    const Point2d base = tip - dir * head;
    draw_thick_segment(page, ink, tail, base, 2.5);
    const Point2d b1 = base + perp * half_base;
    const Point2d b2 = base - perp * half_base;
    paint(page, ink, std::min({tip.x, b1.x, b2.x}), std::min({tip.y, b1.y, b2.y}), std::max({tip.x, b1.x, b2.x}),
          std::max({tip.y, b1.y, b2.y}), [&](Point2d p) { return in_triangle(p, tip, b1, b2); });
    return ink.bbox();
}

/// Alternating-segment bar whose end pixel centres are `length` apart.
BBox draw_scale_bar(GrayImage& page, int x0, int y0, int length, Rng& rng) {
    Ink ink;
    constexpr int height = 12;
    const int segments = rng.integer(4, 5);
    for (int y = y0; y <= y0 + height; ++y) {
        for (int x = x0; x <= x0 + length; ++x) {
            const bool border = y <= y0 + 1 || y >= y0 + height - 1 || x <= x0 + 1 || x >= x0 + length - 1;
            const int seg = std::min(segments - 1, (x - x0) * segments / std::max(1, length));
            if (border || seg % 2 == 0) plot(page, ink, x, y);
        }
    }
    return ink.bbox();
}

/// Axis-aligned outline, 3 px stroke, outer pixel centres span w x h.
BBox draw_section(GrayImage& page, int x0, int y0, int w, int h) {
    Ink ink;
    for (int y = y0; y <= y0 + h; ++y) {
        for (int x = x0; x <= x0 + w; ++x) {
            if (y <= y0 + 2 || y >= y0 + h - 2 || x <= x0 + 2 || x >= x0 + w - 2) plot(page, ink, x, y);
        }
    }
    return ink.bbox();
}

struct LabelChoice {
    const char* text;
    double cm;
};

constexpr std::array<LabelChoice, 8> kLabels{{{"50 cm", 50},
                                              {"1 m", 100},
                                              {"0-1 m", 100},
                                              {"100 cm", 100},
                                              {"0,5 m", 50},
                                              {"500 mm", 50},
                                              {"2 m", 200},
                                              {"1,5 m", 150}}};

BBox perturb(const BBox& b, double f, Rng& rng, int width, int height) {
    if (f <= 0.0) return b;
    BBox out = b;
    const double w = b.width();
    const double h = b.height();
    out.x_min = std::clamp(b.x_min + rng.uniform(-f, f) * w, 0.0, static_cast<double>(width));
    out.x_max = std::clamp(b.x_max + rng.uniform(-f, f) * w, 0.0, static_cast<double>(width));
    out.y_min = std::clamp(b.y_min + rng.uniform(-f, f) * h, 0.0, static_cast<double>(height));
    out.y_max = std::clamp(b.y_max + rng.uniform(-f, f) * h, 0.0, static_cast<double>(height));
    if (!(out.x_min < out.x_max && out.y_min < out.y_max)) return b;
    return out;
}

}  // namespace

SynthPage generate_page(std::uint64_t seed, int page_index, const SynthParams& params) {
    params.validate();
    Rng rng(splitmix(seed ^ splitmix(static_cast<std::uint64_t>(page_index) + 1)));
    SynthPage out;
    out.raster = GrayImage(params.width_px, params.height_px, 255);
    GrayImage& page = out.raster;
    TruthPage& truth = out.truth;
    truth.page_index = page_index;
    const std::string pid = "p" + std::to_string(page_index);
    const std::string prefix = pid + "-";
    const std::string gid_prefix = "S" + std::to_string(seed) + "-P" + std::to_string(page_index) + "-G";

    auto emit = [&](std::string id, ClassLabel label, BBox box) {
        Detection d;
        d.id = std::move(id);
        d.page_id = pid;
        d.label = label;
        d.bbox = box;
        d.confidence = 1.0;
        d.origin = DetectionOrigin::Synthetic;
        out.detections.push_back(std::move(d));
    };

    // Scale: px_per_cm is defined by the integral bar length.
    const double target_ppc = rng.uniform(params.px_per_cm_min, params.px_per_cm_max);
    std::vector<LabelChoice> fitting;
    for (const LabelChoice& l : kLabels) {
        const double px = l.cm * target_ppc;
        if (px >= 100.0 && px <= 520.0) fitting.push_back(l);
    }
    if (fitting.empty()) fitting.push_back(kLabels[1]);
    const LabelChoice label = fitting[static_cast<std::size_t>(rng.integer(0, static_cast<int>(fitting.size()) - 1))];
    const int bar_px = static_cast<int>(std::lround(label.cm * target_ppc));
    const double ppc = bar_px / label.cm;
    truth.px_per_cm = ppc;
    truth.scale_pixel_length = bar_px;
    truth.scale_label = label.text;
    truth.scale_detection_id = prefix + "scale";
    emit(truth.scale_detection_id, ClassLabel::scale,
         draw_scale_bar(page, rng.integer(80, 300), rng.integer(90, 180), bar_px, rng));
    out.labels[truth.scale_detection_id] = label.text;

    // North arrow on a 10 degree bin.
    const bool has_arrow = rng.chance(params.arrow_probability);
    truth.north_angle_deg = rng.integer(0, 35) * 10.0;
    if (has_arrow) {
        truth.arrow_detection_id = prefix + "arrow";
        const Point2d c{params.width_px - 250.0 - rng.uniform(0, 100), 160.0};
        emit(truth.arrow_detection_id, ClassLabel::arrow, draw_arrow(page, c, truth.north_angle_deg));
    }

    // Graves in a 2 x 2 grid below the top band.
    const int n_graves = rng.integer(params.graves_min, params.graves_max);
    std::array<int, 4> cells{0, 1, 2, 3};
    for (int i = 3; i > 0; --i) std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(rng.integer(0, i))]);
    std::sort(cells.begin(), cells.begin() + n_graves);
    const double cell_w = params.width_px / 2.0;
    const double band = 340.0;
    const double cell_h = (params.height_px - band) / 2.0;

    for (int k = 0; k < n_graves; ++k) {
        const int cell = cells[static_cast<std::size_t>(k)];
        const double cx0 = (cell % 2) * cell_w;
        const double cy0 = band + (cell / 2) * cell_h;
        TruthGrave g;
        g.grave_id = gid_prefix + std::to_string(k + 1);
        g.detection_id = prefix + "grave-" + std::to_string(k + 1);
        g.width_cm = rng.uniform(params.grave_width_min_cm, params.grave_width_max_cm);
        const double min_len = std::max(1.3 * g.width_cm, 80.0);
        g.length_cm = rng.uniform(min_len, std::max(min_len, params.grave_length_max_cm));
        g.axis_image_deg = rng.uniform(0.0, 180.0);
        g.axis_bearing_deg = wrap_degrees(g.axis_image_deg - truth.north_angle_deg, 180.0);

        const double w_px = g.width_cm * ppc;
        const double l_px = g.length_cm * ppc;
        const double a = (w_px + 1.0) / 2.0;
        const double b = (l_px + 1.0) / 2.0;
        const auto local = grave_outline_local(a, b, 0.12 * w_px, params.jitter_px, rng);

        // Size of the rotated outline decides where the centre goes.
        std::vector<Point2d> poly;
        poly.reserve(local.size());
        for (const auto& [u, v] : local) poly.push_back(to_page({0, 0}, g.axis_image_deg, u, v));
        double lo_x = poly[0].x, hi_x = poly[0].x, lo_y = poly[0].y, hi_y = poly[0].y;
        for (const Point2d& p : poly) {
            lo_x = std::min(lo_x, p.x);
            hi_x = std::max(hi_x, p.x);
            lo_y = std::min(lo_y, p.y);
            hi_y = std::max(hi_y, p.y);
        }
        const Point2d center{std::round(cx0 + 30.0 + rng.uniform(0, 20) - lo_x),
                             std::round(cy0 + cell_h / 2.0 + rng.uniform(-15, 15))};
        for (Point2d& p : poly) p = p + center;
        g.polygon_px = poly;

        const PixelRect box = polygon_box(poly, page.width(), page.height());
        const auto mask = fill_mask(poly, box);
        const auto inner = erode(mask, box.width(), box.height(), 3);
        Ink grave_ink;
        for (int y = box.y0; y < box.y1; ++y) {
            for (int x = box.x0; x < box.x1; ++x) {
                const std::size_t i = static_cast<std::size_t>(y - box.y0) * box.width() + (x - box.x0);
                if (mask[i] && !inner[i]) plot(page, grave_ink, x, y);
            }
        }
        if (rng.chance(params.stroke_break_probability)) {
            const Point2d at = poly[static_cast<std::size_t>(rng.integer(0, static_cast<int>(poly.size()) - 1))];
            for (int y = static_cast<int>(at.y) - 5; y <= static_cast<int>(at.y) + 5; ++y) {
                for (int x = static_cast<int>(at.x) - 5; x <= static_cast<int>(at.x) + 5; ++x) {
                    if (x >= 0 && y >= 0 && x < page.width() && y < page.height()) page.at(x, y) = 255;
                }
            }
        }
        emit(g.detection_id, ClassLabel::grave, grave_ink.bbox());

        // Skeletons lie along the long axis, skull at a random end.
        const int n_skel = w_px >= 140.0 ? rng.integer(0, 2) : rng.integer(0, 1);
        const double skull_r = std::clamp(w_px / 8.0, 5.0, 14.0);
        for (int j = 0; j < n_skel; ++j) {
            const double u0 = n_skel == 2 ? (j == 0 ? -w_px / 4.0 : w_px / 4.0) : 0.0;
            const double half = 0.275 * l_px;
            const double sign = rng.chance(0.5) ? 1.0 : -1.0;
            const Point2d pelvis = to_page(center, g.axis_image_deg, u0, -sign * half * 0.6);
            const Point2d skull = to_page(center, g.axis_image_deg, u0, sign * half);
            Ink ink;
            draw_thick_segment(page, ink, pelvis, skull, 1.5);
            draw_disc(page, ink, skull, skull_r);
            TruthSkeleton s;
            s.detection_id = prefix + "skeleton-" + std::to_string(k + 1) + "-" + std::to_string(j + 1);
            s.pose = static_cast<Pose>(rng.integer(0, 2));
            s.spine = {pelvis, skull};
            s.bearing_deg = wrap_degrees(image_angle(skull - pelvis) - truth.north_angle_deg, 360.0);
            g.skeletons.push_back(s);
            emit(s.detection_id, ClassLabel::skeleton, ink.bbox());
        }
        // Records list skeletons in reading order, so the truth does too.
        auto detection_of = [&](const TruthSkeleton& s) -> const Detection& {
            return *std::find_if(out.detections.begin(), out.detections.end(),
                                 [&](const Detection& d) { return d.id == s.detection_id; });
        };
        std::stable_sort(g.skeletons.begin(), g.skeletons.end(), [&](const TruthSkeleton& a, const TruthSkeleton& b) {
            return reading_order_less(detection_of(a), detection_of(b));
        });
        if (rng.chance(0.5)) {
            const double side = rng.chance(0.5) ? 1.0 : -1.0;
            const Point2d c = to_page(center, g.axis_image_deg, side * (w_px / 2.0 - 14.0), 0.0);
            Ink ink;
            paint(page, ink, c.x - 3, c.y - 3, c.x + 3, c.y + 3,
                  [&](Point2d p) { return std::abs(p.x - c.x) <= 3.0 && std::abs(p.y - c.y) <= 3.0; });
            emit(prefix + "artefact-" + std::to_string(k + 1) + "-1",
                 rng.chance(0.5) ? ClassLabel::ceramics : ClassLabel::artefact, ink.bbox());
        }

        // Cross-section to the right, centred on the grave.
        const int sec_w = static_cast<int>(std::clamp(0.8 * w_px, 120.0, 300.0));
        const double depth_cm = rng.uniform(params.depth_min_cm, params.depth_max_cm);
        const int sec_h = static_cast<int>(std::lround(depth_cm * ppc));
        g.depth_cm = sec_h / ppc;
        const int sx = grave_ink.x_max + 40;
        const int sy = static_cast<int>(std::clamp(center.y - sec_h / 2.0, cy0 + 5.0, cy0 + cell_h - sec_h - 5.0));
        emit(prefix + "section-" + std::to_string(k + 1), ClassLabel::grave_cross_section,
             draw_section(page, sx, sy, sec_w, sec_h));

        truth.graves.push_back(std::move(g));
    }

    if (params.speckle_density > 0.0) {
        const auto n = static_cast<long long>(params.speckle_density * page.width() * page.height());
        for (long long i = 0; i < n; ++i) {
            page.at(rng.integer(0, page.width() - 1), rng.integer(0, page.height() - 1)) = 0;
        }
    }

    if (params.drop_probability > 0.0 || params.bbox_perturbation > 0.0) {
        std::vector<Detection> kept;
        for (Detection& d : out.detections) {
            const bool droppable = d.label == ClassLabel::skeleton || d.label == ClassLabel::grave_cross_section ||
                                   is_artefact_label(d.label);
            if (droppable && rng.chance(params.drop_probability)) continue;
            d.bbox = perturb(d.bbox, params.bbox_perturbation, rng, page.width(), page.height());
            kept.push_back(d);
        }
        out.detections = std::move(kept);
    }
    return out;
}

// -- Truth files ----------------------------------------------------------------

nlohmann::json truth_json(const std::vector<TruthPage>& pages, std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["pages"] = nlohmann::ordered_json::array();
    for (const TruthPage& p : pages) {
        nlohmann::ordered_json pj;
        pj["page_index"] = p.page_index;
        pj["px_per_cm"] = p.px_per_cm;
        pj["scale"] = {{"detection_id", p.scale_detection_id},
                       {"pixel_length", p.scale_pixel_length},
                       {"label", p.scale_label}};
        pj["north_arrow"] = p.arrow_detection_id.empty()
                                ? nlohmann::ordered_json(nullptr)
                                : nlohmann::ordered_json{{"detection_id", p.arrow_detection_id},
                                                         {"angle_deg", p.north_angle_deg}};
        pj["graves"] = nlohmann::ordered_json::array();
        for (const TruthGrave& g : p.graves) {
            nlohmann::ordered_json gj;
            gj["grave_id"] = g.grave_id;
            gj["detection_id"] = g.detection_id;
            gj["width_cm"] = g.width_cm;
            gj["length_cm"] = g.length_cm;
            gj["depth_cm"] = g.depth_cm;
            gj["axis_image_deg"] = g.axis_image_deg;
            gj["axis_bearing_deg"] = g.axis_bearing_deg;
            gj["polygon_px"] = nlohmann::ordered_json::array();
            for (const Point2d& q : g.polygon_px) gj["polygon_px"].push_back({q.x, q.y});
            gj["skeletons"] = nlohmann::ordered_json::array();
            for (const TruthSkeleton& s : g.skeletons) {
                gj["skeletons"].push_back({{"detection_id", s.detection_id},
                                           {"pose", std::string(to_string(s.pose))},
                                           {"spine", {{"start", {s.spine.start.x, s.spine.start.y}},
                                                      {"end", {s.spine.end.x, s.spine.end.y}}}},
                                           {"bearing_deg", s.bearing_deg}});
            }
            pj["graves"].push_back(std::move(gj));
        }
        j["pages"].push_back(std::move(pj));
    }
    return nlohmann::json::parse(j.dump());
}

std::vector<TruthPage> truth_from_json(const nlohmann::json& j) {
    try {
        std::vector<TruthPage> pages;
        for (const auto& pj : j.at("pages")) {
            TruthPage p;
            p.page_index = pj.at("page_index").get<int>();
            p.px_per_cm = pj.at("px_per_cm").get<double>();
            p.scale_detection_id = pj.at("scale").at("detection_id").get<std::string>();
            p.scale_pixel_length = pj.at("scale").at("pixel_length").get<double>();
            p.scale_label = pj.at("scale").at("label").get<std::string>();
            if (!pj.at("north_arrow").is_null()) {
                p.arrow_detection_id = pj["north_arrow"].at("detection_id").get<std::string>();
                p.north_angle_deg = pj["north_arrow"].at("angle_deg").get<double>();
            }
            for (const auto& gj : pj.at("graves")) {
                TruthGrave g;
                g.grave_id = gj.at("grave_id").get<std::string>();
                g.detection_id = gj.at("detection_id").get<std::string>();
                g.width_cm = gj.at("width_cm").get<double>();
                g.length_cm = gj.at("length_cm").get<double>();
                g.depth_cm = gj.at("depth_cm").get<double>();
                g.axis_image_deg = gj.at("axis_image_deg").get<double>();
                g.axis_bearing_deg = gj.at("axis_bearing_deg").get<double>();
                for (const auto& q : gj.at("polygon_px")) g.polygon_px.push_back({q.at(0).get<double>(), q.at(1).get<double>()});
                for (const auto& sj : gj.at("skeletons")) {
                    TruthSkeleton s;
                    s.detection_id = sj.at("detection_id").get<std::string>();
                    s.pose = parse_pose(sj.at("pose").get<std::string>()).value_or(Pose::unknown);
                    const auto& sp = sj.at("spine");
                    s.spine = {{sp.at("start").at(0).get<double>(), sp.at("start").at(1).get<double>()},
                               {sp.at("end").at(0).get<double>(), sp.at("end").at(1).get<double>()}};
                    s.bearing_deg = sj.at("bearing_deg").get<double>();
                    g.skeletons.push_back(s);
                }
                p.graves.push_back(std::move(g));
            }
            pages.push_back(std::move(p));
        }
        return pages;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("truth file: ") + e.what());
    }
}

std::vector<ExportRow> truth_rows(const std::vector<TruthPage>& pages) {
    std::vector<ExportRow> rows;
    for (const TruthPage& p : pages) {
        for (const TruthGrave& g : p.graves) {
            ExportRow r;
            r.grave_id = g.grave_id;
            r.page = p.page_index;
            r.width_cm = g.width_cm;
            r.length_cm = g.length_cm;
            r.depth_cm = g.depth_cm;
            if (!p.arrow_detection_id.empty()) r.grave_bearing_deg = g.axis_bearing_deg;
            for (const TruthSkeleton& s : g.skeletons) {
                r.skeletons.push_back({std::string(to_string(s.pose)),
                                       p.arrow_detection_id.empty() ? std::nullopt : std::optional(s.bearing_deg)});
            }
            r.px_per_cm = p.px_per_cm;
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

nlohmann::json scripted_corrections(const std::vector<TruthPage>& pages, bool manual_north) {
    nlohmann::json graves = nlohmann::json::array();
    auto advance = [](nlohmann::json payload) {
        return nlohmann::json{{"action", "advance"}, {"payload", std::move(payload)}};
    };
    for (const TruthPage& p : pages) {
        for (const TruthGrave& g : p.graves) {
            nlohmann::json steps = nlohmann::json::array();
            steps.push_back(advance({{"publication_grave_id", g.grave_id}}));
            nlohmann::json spines = nlohmann::json::array();
            nlohmann::json poses = nlohmann::json::object();
            for (const TruthSkeleton& s : g.skeletons) {
                spines.push_back({{"skeleton_id", s.detection_id},
                                  {"start", {s.spine.start.x, s.spine.start.y}},
                                  {"end", {s.spine.end.x, s.spine.end.y}}});
                poses[s.detection_id] = std::string(to_string(s.pose));
            }
            steps.push_back(advance({{"spines", spines}}));
            steps.push_back(advance(nlohmann::json::object()));
            steps.push_back(advance(nlohmann::json::object()));
            if (!p.arrow_detection_id.empty()) {
                steps.push_back(advance(manual_north ? nlohmann::json{{"north_angle_deg", p.north_angle_deg}}
                                                     : nlohmann::json::object()));
            }
            steps.push_back(advance({{"poses", poses}}));
            steps.push_back(advance(nlohmann::json::object()));  // final confirmation
            graves.push_back({{"detection_id", g.detection_id}, {"steps", std::move(steps)}});
        }
    }
    return {{"graves", std::move(graves)}};
}

CorpusFiles write_corpus(const std::string& dir, std::uint64_t seed, int pages, const SynthParams& params) {
    if (pages < 1) throw Error(ErrorCode::InvalidParams, "need at least one page");
    params.validate();
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path root(dir);
    auto write_text = [](const fs::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        out << text;
        if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + path.string());
    };
    std::vector<TruthPage> truth;
    std::vector<Detection> detections;
    nlohmann::json labels = nlohmann::json::object();
    nlohmann::json manifest_pages = nlohmann::json::array();
    for (int i = 0; i < pages; ++i) {
        SynthPage page = generate_page(seed, i, params);
        char name[32];
        std::snprintf(name, sizeof name, "page-%03d.png", i);
        write_file_bytes((root / name).string(), encode_png(page.raster));
        manifest_pages.push_back({{"index", i}, {"image_ref", name}});
        detections.insert(detections.end(), page.detections.begin(), page.detections.end());
        for (const auto& [id, text] : page.labels) labels[id] = text;
        truth.push_back(std::move(page.truth));
    }
    CorpusFiles files{(root / "manifest.json").string(),    (root / "detections.jsonl").string(),
                      (root / "truth.json").string(),       (root / "labels.json").string(),
                      (root / "corrections.json").string(), (root / "corrections-auto.json").string()};
    const nlohmann::json manifest{{"title", "synthetic seed " + std::to_string(seed)},
                                  {"source_ref", "synthkit"},
                                  {"scale_mode", "PerDrawing"},
                                  {"pages", manifest_pages}};
    write_text(files.manifest, manifest.dump(2) + "\n");
    write_text(files.detections, serialize_detections(detections));
    write_text(files.truth, truth_json(truth, seed).dump(2) + "\n");
    write_text(files.labels, labels.dump(2) + "\n");
    write_text(files.corrections, scripted_corrections(truth, true).dump(2) + "\n");
    write_text(files.corrections_auto, scripted_corrections(truth, false).dump(2) + "\n");
    return files;
}

// -- Scoring --------------------------------------------------------------------

const AttributeScore* ScoreReport::attribute(std::string_view name) const {
    for (const auto& a : attributes) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

namespace {

double circular_deg(double a, double b, double period) {
    double d = std::fmod(std::abs(a - b), period);
    return std::min(d, period - d);
}

}  // namespace

ScoreReport score_against_truth(const std::vector<ExportRow>& rows, const std::vector<TruthPage>& truth,
                                const ScoreTolerances& tol) {
    const auto expected = truth_rows(truth);
    std::map<std::string, const ExportRow*> by_id;
    for (const auto& r : rows) by_id.emplace(r.grave_id, &r);
    const bool rows_have_ppc = std::any_of(rows.begin(), rows.end(), [](const ExportRow& r) { return r.px_per_cm.has_value(); });

    ScoreReport report;
    report.truth_graves = static_cast<int>(expected.size());
    AttributeScore width{"width_cm", "%", {}, tol.size_pct};
    AttributeScore length{"length_cm", "%", {}, tol.size_pct};
    AttributeScore depth{"depth_cm", "%", {}, tol.size_pct};
    AttributeScore bearing{"grave_bearing_deg", "deg", {}, tol.bearing_deg};
    AttributeScore skeleton{"skeleton_bearing_deg", "deg", {}, tol.bearing_deg};
    AttributeScore ppc{"px_per_cm", "%", {}, tol.px_per_cm_pct};
    const double nan = std::numeric_limits<double>::quiet_NaN();

    std::vector<ExportRow> matched;
    for (const ExportRow& t : expected) {
        const auto it = by_id.find(t.grave_id);
        const ExportRow* c = it == by_id.end() ? nullptr : it->second;
        if (c) {
            ++report.matched;
            matched.push_back(*c);
        }
        auto rel = [&](AttributeScore& a, const std::optional<double>& cv, const std::optional<double>& tv) {
            if (!tv) return;
            a.deviations.push_back(c && cv ? std::abs(*cv - *tv) / std::abs(*tv) * 100.0 : nan);
        };
        rel(width, c ? c->width_cm : std::nullopt, t.width_cm);
        rel(length, c ? c->length_cm : std::nullopt, t.length_cm);
        rel(depth, c ? c->depth_cm : std::nullopt, t.depth_cm);
        if (rows_have_ppc) rel(ppc, c ? c->px_per_cm : std::nullopt, t.px_per_cm);
        if (t.grave_bearing_deg) {
            bearing.deviations.push_back(c && c->grave_bearing_deg
                                             ? circular_deg(*c->grave_bearing_deg, *t.grave_bearing_deg, 180.0)
                                             : nan);
        }
        for (std::size_t i = 0; i < t.skeletons.size(); ++i) {
            if (!t.skeletons[i].bearing_deg) continue;
            const bool have = c && i < c->skeletons.size() && c->skeletons[i].bearing_deg;
            skeleton.deviations.push_back(
                have ? circular_deg(*c->skeletons[i].bearing_deg, *t.skeletons[i].bearing_deg, 360.0) : nan);
        }
    }
    if (report.matched == 0) throw Error(ErrorCode::NoMatchedGraves, "no synthetic grave ids in the export");

    report.pass = true;
    for (AttributeScore* a : {&width, &length, &depth, &bearing, &skeleton, &ppc}) {
        if (a == &ppc && !rows_have_ppc) continue;
        int within = 0;
        for (double d : a->deviations) {
            if (!std::isnan(d)) a->max_deviation = std::max(a->max_deviation, d);
            if (!std::isnan(d) && d <= a->tolerance) ++within;
        }
        a->fraction_within = a->deviations.empty() ? 1.0 : static_cast<double>(within) / a->deviations.size();
        a->pass = a->fraction_within >= tol.required_fraction;
        report.pass = report.pass && a->pass;
        report.attributes.push_back(*a);
    }
    report.comparison = compare_to_baseline(matched, expected);
    return report;
}

nlohmann::json report_json(const ScoreReport& report) {
    nlohmann::ordered_json j;
    j["truth_graves"] = report.truth_graves;
    j["matched"] = report.matched;
    j["pass"] = report.pass;
    j["mean_error_pct"] = report.comparison.mean_error_pct;
    j["attributes"] = nlohmann::ordered_json::array();
    for (const auto& a : report.attributes) {
        int missing = 0;
        for (double d : a.deviations) missing += std::isnan(d) ? 1 : 0;
        j["attributes"].push_back({{"name", a.name},
                                   {"unit", a.unit},
                                   {"n", a.deviations.size()},
                                   {"missing", missing},
                                   {"tolerance", a.tolerance},
                                   {"fraction_within", a.fraction_within},
                                   {"max_deviation", a.max_deviation},
                                   {"pass", a.pass}});
    }
    return nlohmann::json::parse(j.dump());
}

}  // namespace gravekit
