#include "gravekit/assemble.hpp"
#include "gravekit/detect.hpp"
#include "gravekit/error.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace gravekit;

namespace {

std::vector<Detection> parse(const std::string& text, const ParseOptions& opts = {}) {
    std::istringstream in(text);
    return parse_detections(
        in, [](std::string_view id) -> std::optional<PageSize> {
            if (id == "p1") return PageSize{2000, 3000};
            return std::nullopt;
        },
        opts);
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::StorageFailure;
}

Detection det(std::string id, ClassLabel label, BBox b, double conf = 1.0) {
    return Detection{std::move(id), "p", label, b, conf, DetectionOrigin::Model};
}

}  // namespace

TEST(Detect, WellFormedRecord) {
    const auto d = parse(R"({"page_id":"p1","label":"grave","bbox":[10,10,200,300],"confidence":0.95})");
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].label, ClassLabel::grave);
    EXPECT_EQ(d[0].bbox, (BBox{10, 10, 200, 300}));
    EXPECT_DOUBLE_EQ(d[0].confidence, 0.95);
    EXPECT_EQ(d[0].id, "p1#0");
}

TEST(Detect, UnknownLabelUnlessAliased) {
    const std::string line = R"({"page_id":"p1","label":"burial","bbox":[10,10,200,300],"confidence":0.95})";
    EXPECT_EQ(code_of([&] { parse(line); }), ErrorCode::UnknownLabel);
    ParseOptions o;
    o.aliases = LabelAliases::with_alternative_names();
    EXPECT_EQ(parse(line, o).at(0).label, ClassLabel::grave);
}

TEST(Detect, ClampsToPage) {
    const auto d = parse(R"({"page_id":"p1","label":"grave","bbox":[-5,10,200,3300],"confidence":0.9})");
    EXPECT_EQ(d.at(0).bbox, (BBox{0, 10, 200, 3000}));
}

TEST(Detect, SchemaErrors) {
    EXPECT_EQ(code_of([] { parse(R"({"page_id":"p1","label":"grave","bbox":[10,10,5,300],"confidence":0.9})"); }),
              ErrorCode::SchemaError);
    EXPECT_EQ(code_of([] { parse(R"({"page_id":"p1","label":"grave","bbox":[10,10,20,30],"confidence":1.5})"); }),
              ErrorCode::SchemaError);
    EXPECT_EQ(code_of([] { parse("{not json"); }), ErrorCode::SchemaError);
    EXPECT_EQ(code_of([] { parse(R"({"page_id":"p9","label":"grave","bbox":[1,1,2,2],"confidence":0.9})"); }),
              ErrorCode::UnknownPage);
}

TEST(Detect, SerializeRoundTrip) {
    const auto d = parse(R"({"page_id":"p1","label":"scale","bbox":[1.5,2,30,40],"confidence":0.85}
{"page_id":"p1","id":"x","label":"arrow","bbox":[5,5,50,50],"confidence":0.8}
)");
    EXPECT_EQ(parse(serialize_detections(d)), d);
}

TEST(Confidence, BoundaryIsInclusive) {
    const std::vector<Detection> in{det("a", ClassLabel::grave, {0, 0, 1, 1}, 0.79),
                                    det("b", ClassLabel::grave, {0, 0, 1, 1}, 0.80),
                                    det("c", ClassLabel::grave, {0, 0, 1, 1}, 0.81),
                                    det("d", ClassLabel::grave, {0, 0, 1, 1}, 0.799)};
    const auto out = filter_by_confidence(in, 0.8);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].id, "b");
    EXPECT_EQ(out[1].id, "c");
    EXPECT_TRUE(filter_by_confidence({}, 0.8).empty());
    EXPECT_EQ(filter_by_confidence(in, 0.0), in);
}

TEST(Assemble, Distance) {
    const auto a = det("a", ClassLabel::grave, {0, 0, 2, 2});
    const auto b = det("b", ClassLabel::scale, {3, 4, 5, 6});
    EXPECT_DOUBLE_EQ(bbox_center_distance(a, a), 0.0);
    EXPECT_DOUBLE_EQ(bbox_center_distance(a, b), 5.0);
    auto c = b;
    c.page_id = "other";
    EXPECT_THROW(bbox_center_distance(a, c), Error);
}

TEST(Assemble, SharedScale) {
    const std::vector<Detection> d{det("g1", ClassLabel::grave, {0, 0, 100, 100}),
                                   det("g2", ClassLabel::grave, {200, 0, 300, 100}),
                                   det("s", ClassLabel::scale, {140, 40, 160, 60}),
                                   det("k", ClassLabel::skeleton, {10, 10, 50, 50}),
                                   det("t", ClassLabel::text, {10, 10, 50, 50})};
    const auto trees = assemble_graves(d);
    ASSERT_EQ(trees.size(), 2u);
    EXPECT_EQ(trees[0].scale->id, "s");
    EXPECT_EQ(trees[1].scale->id, "s");
    ASSERT_EQ(trees[0].skeletons.size(), 1u);
    EXPECT_TRUE(trees[1].skeletons.empty());
    EXPECT_TRUE(trees[0].artefacts.empty());
    EXPECT_FALSE(trees[0].north_arrow);
}

TEST(Assemble, ContainmentNeedsNinetyPercentAndCentre) {
    const BBox g{0, 0, 100, 100};
    EXPECT_TRUE(contained_in({90, 0, 100, 10}, g));
    EXPECT_TRUE(contained_in({91, 0, 101, 10}, g));   // 90% inside
    EXPECT_FALSE(contained_in({92, 0, 102, 10}, g));  // 80% inside
    EXPECT_FALSE(contained_in({-10, -10, 200, 200}, g));
}

TEST(Assemble, MatchesBruteForceOnRandomLayouts) {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 300; ++t) {
        const auto layout = oracle::random_layout(rng, t);
        const auto trees = assemble_graves(layout);
        std::vector<oracle::TreeIds> got;
        for (const auto& tree : trees) got.push_back(oracle::ids_of(tree));
        EXPECT_EQ(got, oracle::brute_force_trees(layout)) << "layout " << t;
        auto shuffled = layout;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_EQ(assemble_graves(shuffled), trees) << "layout " << t;
    }
}
