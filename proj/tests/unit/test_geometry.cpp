#include "gravekit/error.hpp"
#include "gravekit/geometry.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace gravekit;

namespace {

GrayImage filled(int w, int h, int pad = 3) {
    GrayImage img(w + 2 * pad, h + 2 * pad, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) img.at(pad + x, pad + y) = 255;
    }
    return img;
}

std::vector<Point2d> rotated_rect(double w, double l, double angle, Point2d c) {
    std::vector<Point2d> pts = {{c.x - w / 2, c.y + l / 2}, {c.x + w / 2, c.y + l / 2}, {c.x + w / 2, c.y - l / 2},
                                {c.x - w / 2, c.y - l / 2}};
    for (auto& p : pts) p = rotate_point(p, angle, c);
    return pts;
}

}  // namespace

TEST(Binarize, WhiteIsBackgroundAndInkIsForeground) {
    GrayImage img(4, 1, 255);
    img.at(1, 0) = 0;
    img.at(2, 0) = 215;  // 255 - 215 = 40, not above the threshold
    img.at(3, 0) = 214;
    const GrayImage b = binarize(img);
    EXPECT_EQ(b.at(0, 0), 0);
    EXPECT_EQ(b.at(1, 0), 255);
    EXPECT_EQ(b.at(2, 0), 0);
    EXPECT_EQ(b.at(3, 0), 255);
}

TEST(Binarize, BinaryInputIsFixedUnderDoubleInversion) {
    // A binary raster written back as a drawing (ink = 0) binarizes to itself.
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        GrayImage bin(17, 11, 0);
        for (auto& p : bin.pixels()) p = (rng() & 1) ? 255 : 0;
        GrayImage drawing(17, 11);
        for (std::size_t i = 0; i < bin.pixels().size(); ++i) drawing.pixels()[i] = 255 - bin.pixels()[i];
        EXPECT_EQ(binarize(drawing), bin);
    }
}

TEST(Trace, FilledRectangleGivesFourCorners) {
    const auto contours = trace_outer_contours(filled(30, 80));
    ASSERT_EQ(contours.size(), 1u);
    EXPECT_EQ(contours[0].points.size(), 4u);
    const auto m = polygon_metrics(contours[0]);
    EXPECT_DOUBLE_EQ(m.area_px2, 29.0 * 79.0);
}

TEST(Trace, FilledBlockAreaIsExact) {
    for (int w = 2; w <= 12; ++w) {
        for (int h = 2; h <= 12; ++h) {
            const auto contours = trace_outer_contours(filled(w, h));
            ASSERT_EQ(contours.size(), 1u);
            EXPECT_EQ(polygon_metrics(contours[0]).area_px2, static_cast<double>((w - 1) * (h - 1))) << w << "x" << h;
        }
    }
}

TEST(Trace, RingHasOnlyItsOuterBorder) {
    GrayImage img(40, 40, 0);
    for (int y = 0; y < 40; ++y) {
        for (int x = 0; x < 40; ++x) {
            const double d = std::hypot(x - 20.0, y - 20.0);
            if (d <= 15.0 && d >= 8.0) img.at(x, y) = 255;
        }
    }
    img.at(20, 20) = 255;  // island inside the hole is not outermost
    EXPECT_EQ(trace_outer_contours(img).size(), 1u);
}

TEST(Trace, MatchesFloodFillBoundaryOracle) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 50; ++t) {
        const GrayImage img = oracle::random_blobs(rng, 48, 36);
        std::vector<oracle::PixelSet> got;
        for (const auto& c : trace_outer_contours(img, ChainApprox::None)) {
            oracle::PixelSet s;
            for (const auto& p : c.points) s.emplace(static_cast<int>(p.x), static_cast<int>(p.y));
            got.push_back(std::move(s));
        }
        std::sort(got.begin(), got.end());
        EXPECT_EQ(got, oracle::outer_boundaries(img)) << "raster " << t;
    }
}

TEST(Trace, SimpleIsSubsetOfNone) {
    std::mt19937_64 rng(5);
    const GrayImage img = oracle::random_blobs(rng, 60, 40);
    const auto none = trace_outer_contours(img, ChainApprox::None);
    const auto simple = trace_outer_contours(img, ChainApprox::Simple);
    ASSERT_EQ(none.size(), simple.size());
    for (std::size_t i = 0; i < none.size(); ++i) {
        oracle::PixelSet all;
        for (const auto& p : none[i].points) all.emplace(static_cast<int>(p.x), static_cast<int>(p.y));
        for (const auto& p : simple[i].points) EXPECT_TRUE(all.count({static_cast<int>(p.x), static_cast<int>(p.y)}));
    }
}

TEST(Metrics, HandExamples) {
    const auto sq = polygon_metrics(make_contour({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
    EXPECT_DOUBLE_EQ(sq.area_px2, 1.0);
    EXPECT_DOUBLE_EQ(sq.arc_length_px, 4.0);
    const auto tri = polygon_metrics(make_contour({{0, 0}, {3, 0}, {0, 4}}));
    EXPECT_DOUBLE_EQ(tri.area_px2, 6.0);
    EXPECT_DOUBLE_EQ(tri.arc_length_px, 12.0);
    EXPECT_THROW(polygon_metrics(make_contour({{0, 0}, {1, 1}})), Error);
}

TEST(Metrics, ShoelaceAgreesWithMonteCarlo) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 10; ++t) {
        const auto poly = oracle::random_simple_polygon(rng, 5 + t);
        const int n = 200000;
        const double mc = oracle::monte_carlo_area(poly, n, rng);
        // Four binomial standard deviations of the estimate.
        const double box = oracle::bbox_area(poly), p = mc / box;
        EXPECT_NEAR(polygon_metrics(make_contour(poly)).area_px2, mc, 4 * box * std::sqrt(p * (1 - p) / n));
    }
}

TEST(Largest, PicksLongestPerimeter) {
    const Contour small = make_contour({{0, 0}, {3, 0}, {3, 3}, {0, 3}});
    const Contour big = make_contour({{0, 0}, {10, 0}, {10, 10}, {0, 10}});
    const std::vector<Contour> one{small};
    EXPECT_EQ(largest_contour(one).points, small.points);
    const std::vector<Contour> two{small, big};
    EXPECT_EQ(largest_contour(two).points, big.points);
    EXPECT_THROW(largest_contour(std::span<const Contour>{}), Error);
}

TEST(Largest, AgreesWithRecomputedPerimeters) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 30; ++t) {
        std::vector<Contour> cs;
        for (int i = 0; i < 6; ++i) cs.push_back(make_contour(oracle::random_simple_polygon(rng, 6)));
        std::size_t best = 0;
        double best_len = -1;
        for (std::size_t i = 0; i < cs.size(); ++i) {
            double len = 0;
            for (std::size_t k = 0; k < cs[i].points.size(); ++k) {
                const auto a = cs[i].points[k], b = cs[i].points[(k + 1) % cs[i].points.size()];
                len += std::hypot(a.x - b.x, a.y - b.y);
            }
            if (len > best_len) {
                best_len = len;
                best = i;
            }
        }
        EXPECT_EQ(largest_contour(cs).points, cs[best].points);
    }
}

TEST(MinAreaRect, AxisAligned) {
    const auto r = min_area_rect(std::vector<Point2d>{{0, 0}, {30, 0}, {30, 80}, {0, 80}});
    EXPECT_NEAR(r.width_px, 30.0, 1e-9);
    EXPECT_NEAR(r.length_px, 80.0, 1e-9);
    EXPECT_NEAR(r.angle_deg, 0.0, 1e-9);
    EXPECT_NEAR(r.center.x, 15.0, 1e-9);
    EXPECT_NEAR(r.center.y, 40.0, 1e-9);
}

TEST(MinAreaRect, RecoversRotation) {
    for (double a : {1.0, 37.0, 89.0, 90.0, 120.0, 179.0}) {
        const auto r = min_area_rect(rotated_rect(30, 80, a, {200, 200}));
        EXPECT_NEAR(r.width_px, 30.0, 1e-6);
        EXPECT_NEAR(r.length_px, 80.0, 1e-6);
        EXPECT_NEAR(r.angle_deg, a, 0.5) << a;
    }
}

TEST(MinAreaRect, NeverWorseThanSweep) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int t = 0; t < 40; ++t) {
        std::vector<Point2d> pts;
        for (int i = 0; i < 20; ++i) pts.push_back({u(rng), u(rng) * 0.4});
        const double sweep = oracle::swept_rect_area(pts);
        const double area = min_area_rect(pts).area();
        EXPECT_LE(area, sweep * (1 + 1e-12));
        EXPECT_GE(area, sweep * (1 - 0.005));
    }
}

TEST(MinAreaRect, CollinearIsDegenerate) {
    EXPECT_THROW(min_area_rect(std::vector<Point2d>{{0, 0}, {1, 1}, {2, 2}}), Error);
}

TEST(Angles, Convention) {
    EXPECT_DOUBLE_EQ(direction_angle_deg(0, -1), 0.0);
    EXPECT_DOUBLE_EQ(direction_angle_deg(1, 0), 90.0);
    EXPECT_DOUBLE_EQ(direction_angle_deg(0, 1), 180.0);
    EXPECT_DOUBLE_EQ(direction_angle_deg(-1, 0), 270.0);
    const Point2d p = rotate_point({0, -1}, 90.0);
    EXPECT_NEAR(p.x, 1.0, 1e-12);
    EXPECT_NEAR(p.y, 0.0, 1e-12);
}
