#include "gravekit/error.hpp"
#include "gravekit/records.hpp"
#include "gravekit/store.hpp"
#include "synth_doc.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gravekit;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::StorageFailure;  // sentinel: nothing thrown
}

/// Scripted wizard steps for one grave, indexed so that steps[i] is the
/// advance out of the i-th status on the path.
std::vector<json> scripted_steps(const testkit::SynthDoc& d, const std::string& detection_id, bool manual_north = true) {
    const json all = scripted_corrections(d.truth, manual_north);
    for (const auto& g : all["graves"]) {
        if (g["detection_id"] == detection_id) return g["steps"].get<std::vector<json>>();
    }
    ADD_FAILURE() << "no script for " << detection_id;
    return {};
}

GraveRecord step(testkit::SynthDoc& d, const std::string& id, Action a, const json& payload = json::object()) {
    return d.service->apply_step(id, d.service->record(id).version, a, payload);
}

/// Advances `n` scripted steps.
GraveRecord advance_n(testkit::SynthDoc& d, const std::string& det, int n) {
    const std::string id = d.record_for(det);
    const auto steps = scripted_steps(d, det);
    GraveRecord r = d.service->record(id);
    for (int i = 0; i < n; ++i) r = step(d, id, Action::advance, steps.at(i).value("payload", json::object()));
    return r;
}

const TruthGrave& first_grave(const testkit::SynthDoc& d) { return d.truth.at(0).graves.at(0); }

int status_index(ValidationStatus s) { return static_cast<int>(s); }

}  // namespace

TEST(Records, ScriptedPathReachesValidated) {
    testkit::SynthDoc d(3, 1);
    d.assemble();
    const std::string det = first_grave(d).detection_id;
    const std::string id = d.record_for(det);
    const auto steps = scripted_steps(d, det);
    std::vector<ValidationStatus> seen;
    int version = d.service->record(id).version;
    for (const auto& s : steps) {
        const auto r = d.service->apply_step(id, version, Action::advance, s["payload"]);
        EXPECT_EQ(r.version, version + 1);
        version = r.version;
        seen.push_back(r.status);
    }
    const std::vector<ValidationStatus> expected{
        ValidationStatus::Step1_Id,   ValidationStatus::Step2_Boxes, ValidationStatus::Step3_Contours,
        ValidationStatus::Step4_Scale, ValidationStatus::Step5_North, ValidationStatus::Step6_Pose,
        ValidationStatus::Validated};
    EXPECT_EQ(seen, expected);
    const auto r = d.service->record(id);
    std::vector<int> logged;
    for (const auto& e : r.edit_log) logged.push_back(e.step);
    EXPECT_EQ(logged, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
    EXPECT_EQ(r.publication_grave_id, first_grave(d).grave_id);
    EXPECT_EQ(r.edit_log.front().timestamp, "2024-01-01T00:00:00Z");
}

TEST(Records, NorthStepIsSkippedWithoutArrow) {
    SynthParams p;
    p.arrow_probability = 0.0;
    testkit::SynthDoc d(4, 1, p);
    d.assemble();
    const std::string det = first_grave(d).detection_id;
    const auto r = advance_n(d, det, 4);
    ASSERT_EQ(r.status, ValidationStatus::Step4_Scale);
    EXPECT_FALSE(r.north);
    const auto six = step(d, r.record_id, Action::advance);
    EXPECT_EQ(six.status, ValidationStatus::Step6_Pose);
    EXPECT_EQ(step(d, r.record_id, Action::back).status, ValidationStatus::Step4_Scale);
    EXPECT_FALSE(six.measurements.grave_bearing_deg);
}

TEST(Records, TransitionTableIsExhaustive) {
    // One fresh record per (status, action) pair.
    testkit::SynthDoc d(5, 14);
    d.assemble();
    std::vector<std::string> dets;
    for (const auto& page : d.truth)
        for (const auto& g : page.graves) dets.push_back(g.detection_id);
    ASSERT_GE(dets.size(), 27u);

    const std::vector<ValidationStatus> path{
        ValidationStatus::Detected,    ValidationStatus::Step1_Id,    ValidationStatus::Step2_Boxes,
        ValidationStatus::Step3_Contours, ValidationStatus::Step4_Scale, ValidationStatus::Step5_North,
        ValidationStatus::Step6_Pose,  ValidationStatus::Validated};
    std::size_t next = 0;
    auto record_at = [&](int position, bool discarded) {
        const std::string det = dets.at(next++);
        GraveRecord r = advance_n(d, det, discarded ? 1 : position);
        if (discarded) r = step(d, r.record_id, Action::discard);
        return r;
    };

    for (int pos = 0; pos <= static_cast<int>(path.size()); ++pos) {
        const bool discarded = pos == static_cast<int>(path.size());
        const ValidationStatus from = discarded ? ValidationStatus::Discarded : path[pos];
        for (Action a : {Action::advance, Action::back, Action::discard}) {
            const GraveRecord r = record_at(pos, discarded);
            ASSERT_EQ(r.status, from);
            const auto steps = scripted_steps(d, r.tree.grave.id);
            const json payload =
                a == Action::advance && pos < static_cast<int>(steps.size()) ? steps[pos]["payload"] : json::object();

            std::optional<ValidationStatus> expected;
            if (a == Action::advance && !discarded && pos + 1 < static_cast<int>(path.size())) expected = path[pos + 1];
            if (a == Action::back && !discarded && pos > 0) expected = path[pos - 1];
            if (a == Action::discard && from == ValidationStatus::Step1_Id) expected = ValidationStatus::Discarded;

            const std::string label = std::string(to_string(from)) + " action " + std::to_string(static_cast<int>(a));
            if (expected) {
                EXPECT_EQ(d.service->apply_step(r.record_id, r.version, a, payload).status, *expected) << label;
            } else {
                EXPECT_EQ(code_of([&] { d.service->apply_step(r.record_id, r.version, a, payload); }),
                          ErrorCode::IllegalTransition)
                    << label;
                const auto after = d.service->record(r.record_id);
                EXPECT_EQ(after.version, r.version);
                EXPECT_EQ(status_index(after.status), status_index(from));
            }
        }
    }
}

TEST(Records, DuplicateGraveIdIsRejected) {
    testkit::SynthDoc d(6, 2);
    d.assemble();
    const std::string a = d.record_for(d.truth[0].graves[0].detection_id);
    const std::string b = d.record_for(d.truth[1].graves[0].detection_id);
    step(d, a, Action::advance, {{"publication_grave_id", "Grave 12"}});
    const auto before = d.service->record(b);
    EXPECT_EQ(code_of([&] { step(d, b, Action::advance, {{"publication_grave_id", "Grave 12"}}); }),
              ErrorCode::DuplicateGraveId);
    EXPECT_EQ(d.service->record(b).version, before.version);
    EXPECT_EQ(step(d, b, Action::advance, {{"publication_grave_id", "Grave 13"}}).status, ValidationStatus::Step1_Id);
    // A discarded record frees its id.
    step(d, a, Action::discard);
    std::vector<std::string> others;
    for (const auto& page : d.truth)
        for (const auto& g : page.graves) others.push_back(d.record_for(g.detection_id));
    std::erase_if(others, [&](const std::string& id) { return id == a || id == b; });
    ASSERT_FALSE(others.empty());
    EXPECT_EQ(step(d, others[0], Action::advance, {{"publication_grave_id", "Grave 12"}}).status,
              ValidationStatus::Step1_Id);
}

TEST(Records, PayloadErrors) {
    testkit::SynthDoc d(6, 1);
    d.assemble();
    const std::string id = d.record_for(first_grave(d).detection_id);
    EXPECT_EQ(code_of([&] { step(d, id, Action::advance, {{"publication_grave_id", ""}}); }),
              ErrorCode::ValidationPayloadError);
    EXPECT_EQ(code_of([&] { step(d, id, Action::advance, json::array()); }), ErrorCode::ValidationPayloadError);
    EXPECT_EQ(d.service->record(id).version, 1);
}

TEST(Store, CompareAndSwapOnVersion) {
    testkit::SynthDoc d(7, 1);
    d.assemble();
    const std::string id = d.record_for(first_grave(d).detection_id);
    const auto r = d.service->record(id);
    EXPECT_EQ(code_of([&] { d.service->apply_step(id, r.version + 1, Action::advance, {{"publication_grave_id", "x"}}); }),
              ErrorCode::StaleVersion);
    d.service->apply_step(id, r.version, Action::advance, {{"publication_grave_id", "x"}});
    // A second writer still holding the old version loses.
    EXPECT_EQ(code_of([&] { d.service->apply_step(id, r.version, Action::advance, {{"publication_grave_id", "y"}}); }),
              ErrorCode::StaleVersion);
    GraveRecord stale = r;
    stale.version = r.version + 1;
    stale.publication_grave_id = "z";
    EXPECT_EQ(code_of([&] { d.store.update_record(stale, r.version); }), ErrorCode::StaleVersion);
    EXPECT_EQ(d.service->record(id).publication_grave_id, "x");
    EXPECT_EQ(code_of([&] { d.service->record("nope"); }), ErrorCode::UnknownRecord);
}

TEST(Store, EditLogIsAppendOnly) {
    testkit::SynthDoc d(7, 1);
    d.assemble();
    const std::string id = d.record_for(first_grave(d).detection_id);
    auto r = step(d, id, Action::advance, {{"publication_grave_id", "x"}});
    GraveRecord rewritten = r;
    rewritten.edit_log.front().change = "tampered";
    rewritten.version = r.version + 1;
    try {
        d.store.update_record(rewritten, r.version);
    } catch (const Error&) {
    }
    EXPECT_EQ(d.service->record(id).edit_log.front().change, r.edit_log.front().change);
}

TEST(Records, ScaleCorrectionRescalesSizes) {
    testkit::SynthDoc d(8, 1);
    d.assemble();
    const auto& g = first_grave(d);
    const auto at3 = advance_n(d, g.detection_id, 3);
    ASSERT_EQ(at3.status, ValidationStatus::Step3_Contours);
    ASSERT_TRUE(at3.conversion && at3.measurements.width_cm && at3.measurements.depth_cm);
    const auto at4 = step(d, at3.record_id, Action::advance, {{"px_per_cm", at3.conversion->px_per_cm / 2}});
    EXPECT_NEAR(*at4.measurements.width_cm, 2 * *at3.measurements.width_cm, 1e-9);
    EXPECT_NEAR(*at4.measurements.length_cm, 2 * *at3.measurements.length_cm, 1e-9);
    EXPECT_NEAR(*at4.measurements.depth_cm, 2 * *at3.measurements.depth_cm, 1e-9);
    EXPECT_EQ(at4.measurements.grave_bearing_deg, at3.measurements.grave_bearing_deg);
    EXPECT_EQ(code_of([&] { step(d, at3.record_id, Action::back); step(d, at3.record_id, Action::advance, {{"px_per_cm", -1}}); }),
              ErrorCode::ValidationPayloadError);
}

TEST(Records, ManualBoxDropsTheOutline) {
    testkit::SynthDoc d(9, 1);
    d.assemble();
    const auto& g = first_grave(d);
    const auto at2 = advance_n(d, g.detection_id, 2);
    EXPECT_TRUE(at2.outline);
    const BBox b = at2.tree.grave.bbox;
    const json box = json::array({b.x_min + 10, b.y_min + 10, b.x_min + 110, b.y_min + 310});
    const auto at3 = step(d, at2.record_id, Action::advance, {{"manual_box", box}});
    EXPECT_TRUE(at3.manual_box);
    EXPECT_FALSE(at3.outline);
    const double ppc = at3.conversion->px_per_cm;
    EXPECT_NEAR(*at3.measurements.width_cm, 100 / ppc, 1e-9);
    EXPECT_NEAR(*at3.measurements.length_cm, 300 / ppc, 1e-9);
    EXPECT_EQ(code_of([&] {
                  step(d, at2.record_id, Action::back);
                  step(d, at2.record_id, Action::advance, {{"manual_box", json::array({5, 5, 5, 9})}});
              }),
              ErrorCode::ValidationPayloadError);
}

TEST(Records, RecomputeIsIdempotent) {
    testkit::SynthDoc d(10, 1);
    d.assemble();
    const std::string id = d.record_for(first_grave(d).detection_id);
    advance_n(d, first_grave(d).detection_id, 4);
    const auto a = d.service->recompute(id);
    const auto b = d.service->recompute(id);
    EXPECT_EQ(a.measurements, b.measurements);
    EXPECT_EQ(a.skeletons, b.skeletons);
    EXPECT_EQ(a.conversion, b.conversion);
    auto derived = [](const GraveRecord& r) {
        auto j = to_json(r);
        j.erase("edit_log");
        j.erase("version");
        return j.dump();
    };
    EXPECT_EQ(derived(a), derived(b));
    EXPECT_EQ(a.status, b.status);
    EXPECT_EQ(b.edit_log.back().change, "recompute");
    EXPECT_EQ(b.edit_log.size(), a.edit_log.size() + 1);
}

TEST(Records, JsonRoundTrip) {
    testkit::SynthDoc d(11, 1);
    d.assemble();
    for (const auto& r : d.service->records(d.doc)) {
        const auto back = record_from_json(to_json(r));
        EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
    }
}

TEST(Records, SourcesSurviveJson) {
    testkit::SynthDoc d(11, 1);
    d.assemble();
    GraveRecord r = d.service->records(d.doc).at(0);
    for (NorthSource ns : {NorthSource::Classifier, NorthSource::Geometric, NorthSource::Manual}) {
        for (ConversionSource cs : {ConversionSource::ScaleBar, ConversionSource::FixedRatio, ConversionSource::Manual}) {
            r.geometry.auto_north = make_north_arrow("n", 30, ns);
            r.conversion = Conversion{2.5, cs};
            const auto back = record_from_json(to_json(r));
            EXPECT_EQ(back.geometry.auto_north->source, ns);
            EXPECT_EQ(back.conversion->source, cs);
        }
    }
    json j = to_json(r);
    j["geometry"]["auto_north"]["source"] = "Compass";
    EXPECT_EQ(code_of([&] { record_from_json(j); }), ErrorCode::SchemaError);
}

TEST(Export, DeterministicAndRoundTrips) {
    testkit::SynthDoc d(12, 3);
    d.assemble();
    d.service->apply_corrections(d.doc, scripted_corrections(d.truth, true));
    const std::string csv = d.service->export_document(d.doc, ExportFormat::csv);
    EXPECT_EQ(csv, d.service->export_document(d.doc, ExportFormat::csv));
    EXPECT_EQ(export_rows_csv(parse_export_csv(csv)), csv);
    const std::string js = d.service->export_document(d.doc, ExportFormat::json);
    EXPECT_EQ(js, d.service->export_document(d.doc, ExportFormat::json));
    EXPECT_EQ(export_records(parse_export_json(js), ExportFormat::json), js);
    EXPECT_EQ(export_records(parse_export_json(js), ExportFormat::csv), csv);
    // JSON rows additionally carry px/cm.
    for (const auto& row : export_rows_from_json(js)) EXPECT_TRUE(row.px_per_cm);
    for (const auto& row : parse_export_csv(csv)) EXPECT_FALSE(row.px_per_cm);
}

TEST(Export, OnlyValidatedUnlessAll) {
    testkit::SynthDoc d(13, 1);
    d.assemble();
    const auto all = parse_export_csv(d.service->export_document(d.doc, ExportFormat::csv, true));
    EXPECT_EQ(all.size(), d.truth[0].graves.size());
    EXPECT_TRUE(parse_export_csv(d.service->export_document(d.doc, ExportFormat::csv)).empty());
}

TEST(Export, CsvHeaderAndQuoting) {
    ExportRow r;
    r.document_id = "doc,1";
    r.grave_id = "G \"7\"";
    r.page = 2;
    r.width_cm = 61.25;
    r.skeletons = {{"supine", 12.5}, {"unknown", std::nullopt}};
    const std::string csv = export_rows_csv({r});
    EXPECT_EQ(csv,
              "document_id,grave_id,page,width_cm,length_cm,depth_cm,grave_bearing_deg,n_skeletons,pose_1,"
              "skeleton_bearing_1_deg,pose_2,skeleton_bearing_2_deg\n"
              "\"doc,1\",\"G \"\"7\"\"\",2,61.25,,,,2,supine,12.5,unknown,\n");
    EXPECT_EQ(parse_export_csv(csv), std::vector<ExportRow>{r});
    EXPECT_EQ(code_of([] { parse_export_csv("grave_id,document_id\n"); }), ErrorCode::SchemaError);
}

TEST(Baseline, ErrorMetric) {
    ExportRow a;
    a.grave_id = "g";
    a.width_cm = 100;
    a.length_cm = 200;
    a.grave_bearing_deg = 10;
    a.skeletons = {{"supine", 359.0}};
    EXPECT_DOUBLE_EQ(compare_to_baseline({a}, {a}).mean_error_pct, 0.0);

    ExportRow b = a;
    b.width_cm = 110;
    EXPECT_DOUBLE_EQ(compare_to_baseline({b}, {a}).mean_error_pct, 10.0);

    ExportRow c = a;
    c.length_cm.reset();
    c.depth_cm = 5;  // baseline has none: skipped
    EXPECT_DOUBLE_EQ(compare_to_baseline({c}, {a}).mean_error_pct, 0.0);

    ExportRow e = a;
    e.skeletons[0].bearing_deg = 1.0;  // 2 degrees round the circle
    e.grave_bearing_deg = 179.0;       // 11 degrees on the axis
    EXPECT_NEAR(compare_to_baseline({e}, {a}).mean_error_pct, 2.0 / 360 * 100 + 11.0 / 180 * 100, 1e-12);

    ExportRow other = a;
    other.grave_id = "h";
    EXPECT_EQ(code_of([&] { compare_to_baseline({other}, {a}); }), ErrorCode::NoMatchedGraves);
    const auto two = compare_to_baseline({a, b, other}, {a});
    EXPECT_EQ(two.n_compared, 1);
}
