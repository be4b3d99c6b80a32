#include "gravekit/calibrate.hpp"
#include "gravekit/error.hpp"
#include "gravekit/orient.hpp"
#include "gravekit/synthkit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace gravekit;

namespace {

GrayImage bar(int length, int thickness, bool vertical) {
    const int pad = 6;
    GrayImage img(vertical ? thickness + 2 * pad : length + 2 * pad, vertical ? length + 2 * pad : thickness + 2 * pad, 255);
    for (int i = 0; i <= length; ++i) {
        for (int t = 0; t < thickness; ++t) {
            if (vertical) img.at(pad + t, pad + i) = 0;
            else img.at(pad + i, pad + t) = 0;
        }
    }
    return img;
}

/// Shaft with a wide head at the top.
GrayImage up_arrow() {
    GrayImage img(61, 121, 255);
    for (int y = 10; y < 115; ++y) {
        for (int x = 28; x <= 32; ++x) img.at(x, y) = 0;
    }
    for (int y = 5; y < 45; ++y) {
        const int half = (y - 5) / 2;
        for (int x = 30 - half; x <= 30 + half; ++x) img.at(x, y) = 0;
    }
    return img;
}

GrayImage rotate_cw(const GrayImage& src) {
    GrayImage out(src.height(), src.width());
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) out.at(src.height() - 1 - y, x) = src.at(x, y);
    }
    return out;
}

}  // namespace

TEST(ScaleBar, SolidBarLength) {
    EXPECT_NEAR(measure_scale_pixels(bar(200, 8, false)), 200.0, 1.0);
    EXPECT_NEAR(measure_scale_pixels(bar(200, 8, true)), 200.0, 1.0);
}

TEST(ScaleBar, SegmentedBarUsesUnionExtent) {
    GrayImage img(330, 30, 255);
    for (int seg = 0; seg < 6; ++seg) {
        if (seg % 2) continue;
        for (int x = 10 + seg * 50; x <= 10 + seg * 50 + 49 && x <= 310; ++x) {
            for (int y = 10; y < 18; ++y) img.at(x, y) = 0;
        }
    }
    // Tick at the far end so the union spans 10..310.
    for (int y = 5; y < 22; ++y) img.at(310, y) = 0;
    EXPECT_NEAR(measure_scale_pixels(img), 300.0, 2.0);
}

TEST(ScaleBar, BlankCropThrows) { EXPECT_THROW(measure_scale_pixels(GrayImage(20, 20, 255)), Error); }

TEST(ScaleLabel, Grammar) {
    EXPECT_EQ(parse_scale_label("50 cm"), (ScaleLabel{ScaleLabel::Kind::Length, 50.0}));
    EXPECT_EQ(parse_scale_label("1 m"), (ScaleLabel{ScaleLabel::Kind::Length, 100.0}));
    EXPECT_EQ(parse_scale_label("1:20"), (ScaleLabel{ScaleLabel::Kind::Ratio, 20.0}));
    EXPECT_EQ(parse_scale_label("M 1:20"), (ScaleLabel{ScaleLabel::Kind::Ratio, 20.0}));
    EXPECT_EQ(parse_scale_label("0,5 m"), parse_scale_label("0.5 m"));
    EXPECT_DOUBLE_EQ(parse_scale_label("0,5 m").value, 50.0);
    EXPECT_DOUBLE_EQ(parse_scale_label("500 mm").value, 50.0);
    EXPECT_DOUBLE_EQ(parse_scale_label("0-1 m").value, 100.0);
    for (const char* bad : {"", "one metre", "1 km", "cm", "1:0"}) {
        EXPECT_THROW(parse_scale_label(bad), Error) << bad;
    }
}

TEST(Conversion, HandArithmetic) {
    EXPECT_DOUBLE_EQ(conversion_from_scale_bar(100, 100).px_per_cm, 1.0);
    EXPECT_DOUBLE_EQ(conversion_from_fixed_ratio(2970, 29.7, 20).px_per_cm, 5.0);
    const Conversion c = conversion_from_scale_bar(200, 50);
    EXPECT_DOUBLE_EQ(c.px_per_cm, 4.0);
    EXPECT_DOUBLE_EQ(120.0 / c.px_per_cm, 30.0);
    EXPECT_THROW(conversion_from_scale_bar(0, 50), Error);
    EXPECT_THROW(conversion_manual(-1), Error);
    const ScaleBar b = make_scale_bar("s", 200, "50 cm");
    EXPECT_DOUBLE_EQ(b.px_per_cm, 4.0);
    EXPECT_THROW(make_scale_bar("s", 200, "1:20"), Error);
}

TEST(North, ImageAngles) {
    EXPECT_DOUBLE_EQ(image_angle({0, -1}), 0.0);
    EXPECT_DOUBLE_EQ(image_angle({1, 0}), 90.0);
    EXPECT_THROW(image_angle({0, 0}), Error);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int i = 0; i < 1000; ++i) {
        const double d = u(rng) * 100;
        const double w = wrap_degrees(d, 360.0);
        EXPECT_GE(w, 0.0);
        EXPECT_LT(w, 360.0);
        EXPECT_NEAR(wrap_degrees(d + 360.0, 360.0), w, 1e-9);
    }
}

TEST(North, GeometricArrowIsRotationEquivariant) {
    GrayImage a = up_arrow();
    for (int quarter = 0; quarter < 4; ++quarter) {
        EXPECT_DOUBLE_EQ(geometric_north(a, "a").angle_deg, quarter * 90.0);
        a = rotate_cw(a);
    }
}

TEST(North, GeometricRecoversSyntheticBins) {
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        const auto page = generate_page(seed, 0);
        for (const auto& d : page.detections) {
            if (d.label != ClassLabel::arrow) continue;
            const auto r = covering_rect(d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max, page.raster.width(),
                                         page.raster.height());
            EXPECT_DOUBLE_EQ(geometric_north(crop(page.raster, r), d.id).angle_deg, page.truth.north_angle_deg)
                << "seed " << seed;
            ++checked;
        }
    }
    EXPECT_GT(checked, 50);
}

TEST(North, ClassifierFallsBackToGeometry) {
    const GrayImage a = up_arrow();
    EXPECT_EQ(north_angle(a, NorthStrategy::Classifier, "a", [](const GrayImage&) { return 9; }).angle_deg, 90.0);
    const auto fb = north_angle(a, NorthStrategy::Classifier, "a", [](const GrayImage&) -> int {
        throw Error(ErrorCode::AdapterFailure, "down");
    });
    EXPECT_EQ(fb.source, NorthSource::Geometric);
    EXPECT_EQ(fb.angle_deg, 0.0);
    EXPECT_EQ(angle_bin(355.0), 0);
    EXPECT_EQ(angle_bin(14.9), 10);
}

TEST(Bearings, SkeletonAndGrave) {
    const NorthArrow up = make_north_arrow("n", 0, NorthSource::Manual);
    const NorthArrow right = make_north_arrow("n", 90, NorthSource::Manual);
    EXPECT_DOUBLE_EQ(skeleton_bearing({{0, 0}, {0, -5}}, up).degrees, 0.0);
    EXPECT_DOUBLE_EQ(skeleton_bearing({{0, 0}, {5, 0}}, up).degrees, 90.0);
    EXPECT_DOUBLE_EQ(skeleton_bearing({{0, 0}, {5, 0}}, right).degrees, 0.0);
    RotatedRect r{{0, 0}, 10, 20, 0};
    EXPECT_DOUBLE_EQ(grave_bearing(r, up).degrees, 0.0);
    r.angle_deg = 100;
    EXPECT_DOUBLE_EQ(grave_bearing(r, up).degrees, 100.0);
}

TEST(Bearings, CoRotationInvariance) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 360);
    for (int i = 0; i < 200; ++i) {
        const double north = u(rng), delta = u(rng), axis = std::fmod(u(rng), 180.0);
        const Point2d v = rotate_point({0, -1}, u(rng));
        const Point2d vr = rotate_point(v, delta);
        const double s0 = skeleton_bearing({{0, 0}, v}, make_north_arrow("n", north, NorthSource::Manual)).degrees;
        const double s1 = skeleton_bearing({{0, 0}, vr}, make_north_arrow("n", north + delta, NorthSource::Manual)).degrees;
        EXPECT_NEAR(std::remainder(s0 - s1, 360.0), 0.0, 1e-7);
        const RotatedRect r0{{0, 0}, 1, 2, axis};
        const RotatedRect r1{{0, 0}, 1, 2, wrap_degrees(axis + delta, 180.0)};
        const double g0 = grave_bearing(r0, make_north_arrow("n", north, NorthSource::Manual)).degrees;
        const double g1 = grave_bearing(r1, make_north_arrow("n", north + delta, NorthSource::Manual)).degrees;
        EXPECT_NEAR(std::remainder(g0 - g1, 180.0), 0.0, 1e-7);
    }
}

TEST(Rose, Counts) {
    const std::vector<double> b{0, 0, 90};
    EXPECT_EQ(rose_histogram(b, 90), (std::vector<int>{2, 1, 0, 0}));
    std::vector<double> uniform;
    for (int i = 0; i < 360; ++i) uniform.push_back(i);
    for (int c : rose_histogram(uniform, 10)) EXPECT_EQ(c, 10);
    std::vector<double> thirty_nine(39, 123.0);
    const auto h = rose_histogram(thirty_nine, 10);
    EXPECT_EQ(std::accumulate(h.begin(), h.end(), 0), 39);
    EXPECT_THROW(rose_histogram(b, 7), Error);
}
