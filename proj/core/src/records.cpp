#include "gravekit/records.hpp"

#include "gravekit/error.hpp"
#include "gravekit/numfmt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

namespace gravekit {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

namespace {

constexpr std::array<std::pair<ValidationStatus, std::string_view>, 9> kStatusNames{{
    {ValidationStatus::Detected, "Detected"},
    {ValidationStatus::Step1_Id, "Step1_Id"},
    {ValidationStatus::Step2_Boxes, "Step2_Boxes"},
    {ValidationStatus::Step3_Contours, "Step3_Contours"},
    {ValidationStatus::Step4_Scale, "Step4_Scale"},
    {ValidationStatus::Step5_North, "Step5_North"},
    {ValidationStatus::Step6_Pose, "Step6_Pose"},
    {ValidationStatus::Validated, "Validated"},
    {ValidationStatus::Discarded, "Discarded"},
}};

}  // namespace

std::string_view to_string(ValidationStatus status) noexcept {
    for (const auto& [s, name] : kStatusNames) {
        if (s == status) return name;
    }
    return "Detected";
}

std::optional<ValidationStatus> parse_status(std::string_view text) noexcept {
    for (const auto& [s, name] : kStatusNames) {
        if (name == text) return s;
    }
    return std::nullopt;
}

std::string_view to_string(Pose pose) noexcept {
    switch (pose) {
        case Pose::supine: return "supine";
        case Pose::flexed_on_side: return "flexed_on_side";
        case Pose::unknown: break;
    }
    return "unknown";
}

std::optional<Pose> parse_pose(std::string_view text) noexcept {
    if (text == "unknown") return Pose::unknown;
    if (text == "supine") return Pose::supine;
    if (text == "flexed_on_side" || text == "flexed on the side") return Pose::flexed_on_side;
    return std::nullopt;
}

std::optional<Action> parse_action(std::string_view text) noexcept {
    if (text == "advance") return Action::advance;
    if (text == "back") return Action::back;
    if (text == "discard") return Action::discard;
    return std::nullopt;
}

// -- JSON ------------------------------------------------------------------

namespace {

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }
ojson opt(const std::optional<std::string>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson point_json(Point2d p) { return ojson::array({p.x, p.y}); }
Point2d point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

ojson bbox_json(const BBox& b) { return ojson::array({b.x_min, b.y_min, b.x_max, b.y_max}); }
BBox bbox_from(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

std::optional<double> opt_double(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
}

std::optional<std::string> opt_string(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

ojson detection_json(const Detection& d) {
    ojson j;
    j["id"] = d.id;
    j["page_id"] = d.page_id;
    j["label"] = std::string(to_string(d.label));
    j["bbox"] = bbox_json(d.bbox);
    j["confidence"] = d.confidence;
    j["origin"] = std::string(to_string(d.origin));
    return j;
}

Detection detection_from(const json& j) {
    Detection d;
    d.id = j.at("id").get<std::string>();
    d.page_id = j.at("page_id").get<std::string>();
    const auto label = parse_label(j.at("label").get<std::string>());
    if (!label) throw Error(ErrorCode::UnknownLabel, j.at("label").get<std::string>());
    d.label = *label;
    d.bbox = bbox_from(j.at("bbox"));
    d.confidence = j.at("confidence").get<double>();
    const std::string origin = j.value("origin", std::string("model"));
    d.origin = origin == "manual"      ? DetectionOrigin::Manual
               : origin == "synthetic" ? DetectionOrigin::Synthetic
                                       : DetectionOrigin::Model;
    return d;
}

ojson opt_detection(const std::optional<Detection>& d) { return d ? detection_json(*d) : ojson(nullptr); }

std::optional<Detection> opt_detection_from(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return detection_from(*it);
}

ojson tree_json(const GraveTree& t) {
    ojson j;
    j["grave"] = detection_json(t.grave);
    j["scale"] = opt_detection(t.scale);
    j["north_arrow"] = opt_detection(t.north_arrow);
    j["cross_section"] = opt_detection(t.cross_section);
    j["skeletons"] = ojson::array();
    for (const auto& d : t.skeletons) j["skeletons"].push_back(detection_json(d));
    j["artefacts"] = ojson::array();
    for (const auto& d : t.artefacts) j["artefacts"].push_back(detection_json(d));
    return j;
}

GraveTree tree_from(const json& j) {
    GraveTree t;
    t.grave = detection_from(j.at("grave"));
    t.scale = opt_detection_from(j, "scale");
    t.north_arrow = opt_detection_from(j, "north_arrow");
    t.cross_section = opt_detection_from(j, "cross_section");
    for (const auto& d : j.at("skeletons")) t.skeletons.push_back(detection_from(d));
    for (const auto& d : j.at("artefacts")) t.artefacts.push_back(detection_from(d));
    return t;
}

ojson spine_json(const SpineArrow& s) { return ojson{{"start", point_json(s.start)}, {"end", point_json(s.end)}}; }
SpineArrow spine_from(const json& j) { return {point_from(j.at("start")), point_from(j.at("end"))}; }

ojson rect_json(const RotatedRect& r) {
    return ojson{{"center", point_json(r.center)},
                 {"width_px", r.width_px},
                 {"length_px", r.length_px},
                 {"angle_deg", r.angle_deg}};
}

RotatedRect rect_from(const json& j) {
    RotatedRect r;
    r.center = point_from(j.at("center"));
    r.width_px = j.at("width_px").get<double>();
    r.length_px = j.at("length_px").get<double>();
    r.angle_deg = j.at("angle_deg").get<double>();
    return r;
}

std::optional<RotatedRect> opt_rect_from(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return rect_from(*it);
}

ojson points_json(const std::vector<Point2d>& pts) {
    ojson a = ojson::array();
    for (const Point2d& p : pts) a.push_back(point_json(p));
    return a;
}

std::vector<Point2d> points_from(const json& j) {
    std::vector<Point2d> pts;
    pts.reserve(j.size());
    for (const auto& p : j) pts.push_back(point_from(p));
    return pts;
}

ojson north_json(const NorthArrow& n) {
    return ojson{{"detection_id", n.detection_id},
                 {"angle_deg", n.angle_deg},
                 {"bin_deg", n.bin_deg},
                 {"source", std::string(to_string(n.source))}};
}

NorthArrow north_from(const json& j) {
    NorthArrow n;
    n.detection_id = j.at("detection_id").get<std::string>();
    n.angle_deg = j.at("angle_deg").get<double>();
    n.bin_deg = j.at("bin_deg").get<int>();
    const std::string s = j.at("source").get<std::string>();
    for (NorthSource v : {NorthSource::Classifier, NorthSource::Geometric, NorthSource::Manual}) {
        if (s == to_string(v)) {
            n.source = v;
            return n;
        }
    }
    throw Error(ErrorCode::SchemaError, "unknown north source '" + s + "'");
}

std::optional<NorthArrow> opt_north_from(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return north_from(*it);
}

ojson conversion_json(const Conversion& c) {
    return ojson{{"px_per_cm", c.px_per_cm}, {"source", std::string(to_string(c.source))}};
}

Conversion conversion_from(const json& j) {
    Conversion c;
    c.px_per_cm = j.at("px_per_cm").get<double>();
    const std::string s = j.at("source").get<std::string>();
    for (ConversionSource v : {ConversionSource::ScaleBar, ConversionSource::FixedRatio, ConversionSource::Manual}) {
        if (s == to_string(v)) {
            c.source = v;
            return c;
        }
    }
    throw Error(ErrorCode::SchemaError, "unknown conversion source '" + s + "'");
}

ojson pinned_json(const std::optional<std::optional<std::string>>& v) {
    if (!v) return ojson{{"set", false}};
    return ojson{{"set", true}, {"id", opt(*v)}};
}

std::optional<std::optional<std::string>> pinned_from(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->value("set", false)) return std::nullopt;
    return std::optional<std::optional<std::string>>(opt_string(*it, "id"));
}

std::optional<BBox> opt_bbox_from(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return bbox_from(*it);
}

ojson opt_bbox(const std::optional<BBox>& b) { return b ? bbox_json(*b) : ojson(nullptr); }

ojson edits_json(const RecordEdits& e) {
    ojson j;
    j["grave_bbox"] = opt_bbox(e.grave_bbox);
    j["scale_id"] = pinned_json(e.scale_id);
    j["north_arrow_id"] = pinned_json(e.north_arrow_id);
    j["cross_section_id"] = pinned_json(e.cross_section_id);
    j["added"] = ojson::array();
    for (const auto& d : e.added) j["added"].push_back(detection_json(d));
    j["removed"] = e.removed;
    j["spines"] = ojson::object();
    for (const auto& [id, s] : e.spines) j["spines"][id] = spine_json(s);
    j["manual_grave_box"] = opt_bbox(e.manual_grave_box);
    j["manual_section_box"] = opt_bbox(e.manual_section_box);
    j["scale_text"] = opt(e.scale_text);
    j["fixed_ratio"] = opt(e.fixed_ratio);
    j["page_height_cm"] = opt(e.page_height_cm);
    j["px_per_cm"] = opt(e.px_per_cm);
    j["north_angle_deg"] = opt(e.north_angle_deg);
    j["poses"] = ojson::object();
    for (const auto& [id, p] : e.poses) j["poses"][id] = std::string(to_string(p));
    return j;
}

RecordEdits edits_from(const json& j) {
    RecordEdits e;
    e.grave_bbox = opt_bbox_from(j, "grave_bbox");
    e.scale_id = pinned_from(j, "scale_id");
    e.north_arrow_id = pinned_from(j, "north_arrow_id");
    e.cross_section_id = pinned_from(j, "cross_section_id");
    for (const auto& d : j.at("added")) e.added.push_back(detection_from(d));
    e.removed = j.at("removed").get<std::vector<std::string>>();
    for (const auto& [id, s] : j.at("spines").items()) e.spines[id] = spine_from(s);
    e.manual_grave_box = opt_bbox_from(j, "manual_grave_box");
    e.manual_section_box = opt_bbox_from(j, "manual_section_box");
    e.scale_text = opt_string(j, "scale_text");
    e.fixed_ratio = opt_double(j, "fixed_ratio");
    e.page_height_cm = opt_double(j, "page_height_cm");
    e.px_per_cm = opt_double(j, "px_per_cm");
    e.north_angle_deg = opt_double(j, "north_angle_deg");
    for (const auto& [id, p] : j.at("poses").items()) e.poses[id] = parse_pose(p.get<std::string>()).value_or(Pose::unknown);
    return e;
}

ojson geometry_json(const GeometryCache& g) {
    ojson j;
    j["grave_contour"] = g.grave_contour ? points_json(g.grave_contour->points) : ojson(nullptr);
    j["grave_rect"] = g.grave_rect ? rect_json(*g.grave_rect) : ojson(nullptr);
    j["scale_pixel_length"] = opt(g.scale_pixel_length);
    j["ocr_text"] = opt(g.ocr_text);
    j["section_rect"] = g.section_rect ? rect_json(*g.section_rect) : ojson(nullptr);
    j["auto_north"] = g.auto_north ? north_json(*g.auto_north) : ojson(nullptr);
    j["issues"] = g.issues;
    return j;
}

GeometryCache geometry_from(const json& j) {
    GeometryCache g;
    if (j.contains("grave_contour") && !j["grave_contour"].is_null()) {
        g.grave_contour = make_contour(points_from(j["grave_contour"]));
    }
    g.grave_rect = opt_rect_from(j, "grave_rect");
    g.scale_pixel_length = opt_double(j, "scale_pixel_length");
    g.ocr_text = opt_string(j, "ocr_text");
    g.section_rect = opt_rect_from(j, "section_rect");
    g.auto_north = opt_north_from(j, "auto_north");
    g.issues = j.at("issues").get<std::vector<std::string>>();
    return g;
}

}  // namespace

ojson to_json(const GraveRecord& r) {
    ojson j;
    j["record_id"] = r.record_id;
    j["publication_grave_id"] = r.publication_grave_id;
    j["document_id"] = r.document_id;
    j["page_id"] = r.page_id;
    j["page_index"] = r.page_index;
    j["status"] = std::string(to_string(r.status));
    j["tree"] = tree_json(r.tree);
    j["measurements"] = ojson{{"width_cm", opt(r.measurements.width_cm)},
                              {"length_cm", opt(r.measurements.length_cm)},
                              {"depth_cm", opt(r.measurements.depth_cm)},
                              {"grave_bearing_deg", opt(r.measurements.grave_bearing_deg)}};
    j["skeletons"] = ojson::array();
    for (const auto& s : r.skeletons) {
        j["skeletons"].push_back(ojson{{"detection_id", s.detection_id},
                                       {"pose", std::string(to_string(s.pose))},
                                       {"spine", s.spine ? spine_json(*s.spine) : ojson(nullptr)},
                                       {"bearing_deg", opt(s.bearing_deg)}});
    }
    j["outline"] = r.outline ? ojson{{"points", points_json(r.outline->points)},
                                     {"source_record_id", r.outline->source_record_id}}
                             : ojson(nullptr);
    j["manual_box"] = r.manual_box;
    j["conversion"] = r.conversion ? conversion_json(*r.conversion) : ojson(nullptr);
    j["scale_bar"] = r.scale_bar ? ojson{{"detection_id", r.scale_bar->detection_id},
                                         {"pixel_length", r.scale_bar->pixel_length},
                                         {"label_text", r.scale_bar->label_text},
                                         {"real_length_cm", r.scale_bar->real_length_cm},
                                         {"px_per_cm", r.scale_bar->px_per_cm}}
                                 : ojson(nullptr);
    j["north"] = r.north ? north_json(*r.north) : ojson(nullptr);
    j["issues"] = r.issues;
    j["needs_manual_box"] = r.needs_manual_box;
    j["geometry"] = geometry_json(r.geometry);
    j["edits"] = edits_json(r.edits);
    j["edit_log"] = ojson::array();
    for (const auto& e : r.edit_log) {
        j["edit_log"].push_back(ojson{{"timestamp", e.timestamp}, {"step", e.step}, {"change", e.change}});
    }
    j["version"] = r.version;
    return j;
}

GraveRecord record_from_json(const json& j) {
    try {
        GraveRecord r;
        r.record_id = j.at("record_id").get<std::string>();
        r.publication_grave_id = j.at("publication_grave_id").get<std::string>();
        r.document_id = j.at("document_id").get<std::string>();
        r.page_id = j.at("page_id").get<std::string>();
        r.page_index = j.at("page_index").get<int>();
        const auto status = parse_status(j.at("status").get<std::string>());
        if (!status) throw Error(ErrorCode::SchemaError, "unknown status");
        r.status = *status;
        r.tree = tree_from(j.at("tree"));
        const json& m = j.at("measurements");
        r.measurements = {opt_double(m, "width_cm"), opt_double(m, "length_cm"), opt_double(m, "depth_cm"),
                          opt_double(m, "grave_bearing_deg")};
        for (const auto& s : j.at("skeletons")) {
            SkeletonEntry e;
            e.detection_id = s.at("detection_id").get<std::string>();
            e.pose = parse_pose(s.at("pose").get<std::string>()).value_or(Pose::unknown);
            if (!s.at("spine").is_null()) e.spine = spine_from(s["spine"]);
            e.bearing_deg = opt_double(s, "bearing_deg");
            r.skeletons.push_back(std::move(e));
        }
        if (!j.at("outline").is_null()) {
            Outline o;
            o.points = points_from(j["outline"].at("points"));
            o.source_record_id = j["outline"].at("source_record_id").get<std::string>();
            r.outline = std::move(o);
        }
        r.manual_box = j.at("manual_box").get<bool>();
        if (!j.at("conversion").is_null()) r.conversion = conversion_from(j["conversion"]);
        if (!j.at("scale_bar").is_null()) {
            const json& s = j["scale_bar"];
            r.scale_bar = ScaleBar{s.at("detection_id").get<std::string>(), s.at("pixel_length").get<double>(),
                                   s.at("label_text").get<std::string>(), s.at("real_length_cm").get<double>(),
                                   s.at("px_per_cm").get<double>()};
        }
        r.north = opt_north_from(j, "north");
        r.issues = j.at("issues").get<std::vector<std::string>>();
        r.needs_manual_box = j.at("needs_manual_box").get<bool>();
        r.geometry = geometry_from(j.at("geometry"));
        r.edits = edits_from(j.at("edits"));
        if (const auto it = j.find("edit_log"); it != j.end()) {
            for (const auto& e : *it) {
                r.edit_log.push_back(
                    {e.at("timestamp").get<std::string>(), e.at("step").get<int>(), e.at("change").get<std::string>()});
            }
        }
        r.version = j.at("version").get<int>();
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("record: ") + e.what());
    }
}

// -- Operations -------------------------------------------------------------

namespace {

std::vector<Detection> usable_detections(const RecordContext& ctx) {
    return filter_by_confidence(ctx.page.detections, ctx.pipeline.confidence_threshold);
}

void log(GraveRecord& r, const RecordContext& ctx, int step, std::string change) {
    r.edit_log.push_back({ctx.now ? ctx.now() : std::string(), step, std::move(change)});
}

[[noreturn]] void payload_error(const std::string& msg) { throw Error(ErrorCode::ValidationPayloadError, msg); }

/// Full re-measurement: tree, geometry, then arithmetic.
void remeasure(GraveRecord& r, const RecordContext& ctx) {
    r.tree = rebuild_tree(r, usable_detections(ctx));
    r.geometry = measure_tree(r.tree, r.edits, ctx.page, ctx.pipeline);
    finalize(r, ctx.page.document, ctx.page.page);
}

BBox payload_bbox(const json& j, const char* what, const Page& page) {
    if (!j.is_array() || j.size() != 4) payload_error(std::string(what) + " must be [x_min, y_min, x_max, y_max]");
    for (const auto& v : j) {
        if (!v.is_number()) payload_error(std::string(what) + " must contain numbers");
    }
    BBox b = bbox_from(j);
    b.x_min = std::clamp(b.x_min, 0.0, static_cast<double>(page.width_px));
    b.x_max = std::clamp(b.x_max, 0.0, static_cast<double>(page.width_px));
    b.y_min = std::clamp(b.y_min, 0.0, static_cast<double>(page.height_px));
    b.y_max = std::clamp(b.y_max, 0.0, static_cast<double>(page.height_px));
    if (!(b.x_min < b.x_max && b.y_min < b.y_max)) payload_error(std::string(what) + " is empty within the page");
    return b;
}

Point2d payload_point(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        payload_error(std::string(what) + " must be [x, y]");
    }
    return point_from(j);
}

double payload_positive(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number() || !(it->get<double>() > 0.0) || !std::isfinite(it->get<double>())) {
        payload_error(std::string(key) + " must be a positive number");
    }
    return it->get<double>();
}

std::optional<std::optional<std::string>> payload_pin(const json& p, const char* key) {
    const auto it = p.find(key);
    if (it == p.end()) return std::nullopt;
    if (it->is_null()) return std::optional<std::optional<std::string>>(std::optional<std::string>());
    if (!it->is_string()) payload_error(std::string(key) + " must be a detection id or null");
    return std::optional<std::optional<std::string>>(it->get<std::string>());
}

void apply_step1(GraveRecord& r, const json& p, const RecordContext& ctx) {
    const auto it = p.find("publication_grave_id");
    if (it == p.end() || !it->is_string() || it->get<std::string>().empty()) {
        payload_error("step 1 needs a non-empty publication_grave_id");
    }
    const std::string id = it->get<std::string>();
    if (ctx.grave_id_taken && ctx.grave_id_taken(id)) {
        throw Error(ErrorCode::DuplicateGraveId, "grave id '" + id + "' is already used in " + r.document_id);
    }
    r.publication_grave_id = id;
}

void apply_step2(GraveRecord& r, const json& p, const RecordContext& ctx) {
    RecordEdits& e = r.edits;
    const Page& page = ctx.page.page;
    const std::vector<Detection> page_dets = usable_detections(ctx);
    auto known = [&](const std::string& id) {
        const auto match = [&](const Detection& d) { return d.id == id; };
        return std::any_of(page_dets.begin(), page_dets.end(), match) ||
               std::any_of(e.added.begin(), e.added.end(), match);
    };

    if (const auto it = p.find("grave_bbox"); it != p.end() && !it->is_null()) {
        e.grave_bbox = payload_bbox(*it, "grave_bbox", page);
    }
    if (const auto it = p.find("remove"); it != p.end()) {
        if (!it->is_array()) payload_error("remove must be a list of detection ids");
        for (const auto& id : *it) {
            if (!id.is_string()) payload_error("remove must be a list of detection ids");
            if (id.get<std::string>() == r.tree.grave.id) payload_error("the grave itself cannot be removed");
            if (std::find(e.removed.begin(), e.removed.end(), id.get<std::string>()) == e.removed.end()) {
                e.removed.push_back(id.get<std::string>());
            }
        }
    }
    if (const auto it = p.find("add"); it != p.end()) {
        if (!it->is_array()) payload_error("add must be a list of {label, bbox}");
        for (const auto& a : *it) {
            if (!a.is_object() || !a.contains("label") || !a["label"].is_string()) payload_error("added object needs a label");
            const auto label = parse_label(a["label"].get<std::string>());
            if (!label) payload_error("unknown label '" + a["label"].get<std::string>() + "'");
            Detection d;
            d.id = r.tree.grave.id + "+m" + std::to_string(e.added.size() + 1);
            d.page_id = r.page_id;
            d.label = *label;
            d.bbox = payload_bbox(a.value("bbox", json()), "bbox", page);
            d.confidence = 1.0;
            d.origin = DetectionOrigin::Manual;
            e.added.push_back(d);
            // Added reference objects belong to this grave.
            if (d.label == ClassLabel::scale && !p.contains("scale_id")) e.scale_id = std::optional<std::string>(d.id);
            if (d.label == ClassLabel::arrow && !p.contains("north_arrow_id")) e.north_arrow_id = std::optional<std::string>(d.id);
            if (d.label == ClassLabel::grave_cross_section && !p.contains("cross_section_id")) {
                e.cross_section_id = std::optional<std::string>(d.id);
            }
        }
    }
    for (const auto& [key, slot] : {std::pair{"scale_id", &e.scale_id}, std::pair{"north_arrow_id", &e.north_arrow_id},
                                    std::pair{"cross_section_id", &e.cross_section_id}}) {
        if (auto pin = payload_pin(p, key)) {
            if (*pin && !known(**pin)) payload_error(std::string(key) + " '" + **pin + "' is not on this page");
            *slot = pin;
        }
    }

    remeasure(r, ctx);

    if (const auto it = p.find("spines"); it != p.end()) {
        if (!it->is_array()) payload_error("spines must be a list");
        for (const auto& s : *it) {
            if (!s.is_object() || !s.contains("skeleton_id") || !s["skeleton_id"].is_string()) {
                payload_error("spine needs a skeleton_id");
            }
            const std::string id = s["skeleton_id"].get<std::string>();
            const bool in_tree = std::any_of(r.tree.skeletons.begin(), r.tree.skeletons.end(),
                                             [&](const Detection& d) { return d.id == id; });
            if (!in_tree) payload_error("skeleton '" + id + "' is not part of this grave");
            SpineArrow spine{payload_point(s.value("start", json()), "start"), payload_point(s.value("end", json()), "end")};
            if (spine.start == spine.end) payload_error("spine of '" + id + "' has zero length");
            e.spines[id] = spine;
        }
    }
    for (const Detection& s : r.tree.skeletons) {
        if (!e.spines.contains(s.id)) payload_error("skeleton '" + s.id + "' needs a spine arrow");
    }
    // Drop spines of skeletons that left the tree.
    std::erase_if(e.spines, [&](const auto& kv) {
        return std::none_of(r.tree.skeletons.begin(), r.tree.skeletons.end(),
                            [&](const Detection& d) { return d.id == kv.first; });
    });
    finalize(r, ctx.page.document, ctx.page.page);
}

void apply_step3(GraveRecord& r, const json& p, const RecordContext& ctx) {
    const Page& page = ctx.page.page;
    if (const auto it = p.find("manual_box"); it != p.end()) {
        if (it->is_null()) r.edits.manual_grave_box.reset();
        else r.edits.manual_grave_box = payload_bbox(*it, "manual_box", page);
    }
    if (const auto it = p.find("manual_cross_section_box"); it != p.end()) {
        if (it->is_null()) r.edits.manual_section_box.reset();
        else r.edits.manual_section_box = payload_bbox(*it, "manual_cross_section_box", page);
    }
    if (!r.edits.manual_grave_box && !r.geometry.grave_contour) {
        payload_error("no grave contour was found; a manual box is required");
    }
    finalize(r, ctx.page.document, ctx.page.page);
}

void apply_step4(GraveRecord& r, const json& p, const RecordContext& ctx) {
    RecordEdits& e = r.edits;
    if (p.contains("px_per_cm")) {
        e.px_per_cm = payload_positive(p, "px_per_cm");
    }
    if (p.contains("fixed_ratio") || p.contains("page_height_cm")) {
        e.fixed_ratio = payload_positive(p, "fixed_ratio");
        e.page_height_cm = payload_positive(p, "page_height_cm");
    }
    if (const auto it = p.find("scale_text"); it != p.end()) {
        if (!it->is_string()) payload_error("scale_text must be a string");
        try {
            const ScaleLabel label = parse_scale_label(it->get<std::string>());
            if (label.kind == ScaleLabel::Kind::Ratio && !e.page_height_cm && !ctx.page.document.scale.page_height_cm) {
                payload_error("a ratio label needs page_height_cm");
            }
        } catch (const Error& err) {
            if (err.code() == ErrorCode::ValidationPayloadError) throw;
            payload_error(err.what());
        }
        e.scale_text = it->get<std::string>();
    }
    finalize(r, ctx.page.document, ctx.page.page);
    if (!r.conversion) payload_error("the scale is still unresolved; enter the label text or a fixed ratio");
}

void apply_step5(GraveRecord& r, const json& p, const RecordContext& ctx) {
    if (const auto it = p.find("north_angle_deg"); it != p.end()) {
        if (!it->is_number() || !std::isfinite(it->get<double>())) payload_error("north_angle_deg must be a number");
        r.edits.north_angle_deg = wrap_degrees(it->get<double>(), 360.0);
    }
    finalize(r, ctx.page.document, ctx.page.page);
}

void apply_step6(GraveRecord& r, const json& p, const RecordContext& ctx) {
    const auto it = p.find("poses");
    if (it != p.end()) {
        auto set = [&](const std::string& id, const json& v) {
            if (!v.is_string()) payload_error("pose must be a string");
            const auto pose = parse_pose(v.get<std::string>());
            if (!pose) payload_error("pose must be unknown, supine or flexed_on_side");
            const bool in_tree = std::any_of(r.tree.skeletons.begin(), r.tree.skeletons.end(),
                                             [&](const Detection& d) { return d.id == id; });
            if (!in_tree) payload_error("skeleton '" + id + "' is not part of this grave");
            r.edits.poses[id] = *pose;
        };
        if (it->is_array()) {
            if (it->size() != r.tree.skeletons.size()) payload_error("one pose per skeleton expected");
            for (std::size_t i = 0; i < it->size(); ++i) set(r.tree.skeletons[i].id, (*it)[i]);
        } else if (it->is_object()) {
            for (const auto& [id, v] : it->items()) set(id, v);
        } else {
            payload_error("poses must be a list or an object");
        }
    }
    finalize(r, ctx.page.document, ctx.page.page);
}

int step_of(ValidationStatus s) {
    switch (s) {
        case ValidationStatus::Step1_Id: return 1;
        case ValidationStatus::Step2_Boxes: return 2;
        case ValidationStatus::Step3_Contours: return 3;
        case ValidationStatus::Step4_Scale: return 4;
        case ValidationStatus::Step5_North: return 5;
        case ValidationStatus::Step6_Pose: return 6;
        case ValidationStatus::Validated: return 7;
        default: return 0;
    }
}

std::optional<ValidationStatus> previous_status(const GraveRecord& r) {
    switch (r.status) {
        case ValidationStatus::Step1_Id: return ValidationStatus::Detected;
        case ValidationStatus::Step2_Boxes: return ValidationStatus::Step1_Id;
        case ValidationStatus::Step3_Contours: return ValidationStatus::Step2_Boxes;
        case ValidationStatus::Step4_Scale: return ValidationStatus::Step3_Contours;
        case ValidationStatus::Step5_North: return ValidationStatus::Step4_Scale;
        case ValidationStatus::Step6_Pose:
            return r.north ? ValidationStatus::Step5_North : ValidationStatus::Step4_Scale;
        case ValidationStatus::Validated: return ValidationStatus::Step6_Pose;
        default: return std::nullopt;
    }
}

}  // namespace

std::optional<ValidationStatus> next_status(const GraveRecord& r) noexcept {
    switch (r.status) {
        case ValidationStatus::Detected: return ValidationStatus::Step1_Id;
        case ValidationStatus::Step1_Id: return ValidationStatus::Step2_Boxes;
        case ValidationStatus::Step2_Boxes: return ValidationStatus::Step3_Contours;
        case ValidationStatus::Step3_Contours: return ValidationStatus::Step4_Scale;
        case ValidationStatus::Step4_Scale:
            return r.north ? ValidationStatus::Step5_North : ValidationStatus::Step6_Pose;
        case ValidationStatus::Step5_North: return ValidationStatus::Step6_Pose;
        case ValidationStatus::Step6_Pose: return ValidationStatus::Validated;
        default: return std::nullopt;
    }
}

GraveRecord create_record(const GraveTree& tree, const RecordContext& ctx) {
    GraveRecord r;
    r.document_id = ctx.page.document.id;
    r.page_id = ctx.page.page.id;
    r.page_index = ctx.page.page.index;
    r.tree = tree;
    r.geometry = measure_tree(tree, r.edits, ctx.page, ctx.pipeline);
    finalize(r, ctx.page.document, ctx.page.page);
    log(r, ctx, 0, "created from detection " + tree.grave.id);
    return r;
}

GraveRecord transition(const GraveRecord& record, Action action, const json& payload, const RecordContext& ctx) {
    GraveRecord r = record;
    const json p = payload.is_null() ? json::object() : payload;
    if (!p.is_object()) payload_error("payload must be a JSON object");
    const std::string status_name(to_string(record.status));

    switch (action) {
        case Action::discard: {
            if (record.status != ValidationStatus::Step1_Id) {
                throw Error(ErrorCode::IllegalTransition, "discard is only possible at Step1_Id, not " + status_name);
            }
            r.status = ValidationStatus::Discarded;
            log(r, ctx, 1, "discarded");
            break;
        }
        case Action::back: {
            const auto prev = previous_status(record);
            if (!prev) throw Error(ErrorCode::IllegalTransition, "no previous step from " + status_name);
            r.status = *prev;
            log(r, ctx, step_of(record.status), std::string("back to ") + std::string(to_string(*prev)));
            break;
        }
        case Action::advance: {
            const auto next = next_status(record);
            if (!next) throw Error(ErrorCode::IllegalTransition, "cannot advance from " + status_name);
            const int step = step_of(*next);
            switch (step) {
                case 1: apply_step1(r, p, ctx); break;
                case 2: apply_step2(r, p, ctx); break;
                case 3: apply_step3(r, p, ctx); break;
                case 4: apply_step4(r, p, ctx); break;
                case 5: apply_step5(r, p, ctx); break;
                case 6: apply_step6(r, p, ctx); break;
                default: break;
            }
            r.status = *next;
            log(r, ctx, step, p.dump());
            break;
        }
    }
    r.version = record.version + 1;
    return r;
}

GraveRecord recompute(const GraveRecord& record, const RecordContext& ctx) {
    GraveRecord r = record;
    remeasure(r, ctx);
    std::erase_if(r.edits.spines, [&](const auto& kv) {
        return std::none_of(r.tree.skeletons.begin(), r.tree.skeletons.end(),
                            [&](const Detection& d) { return d.id == kv.first; });
    });
    finalize(r, ctx.page.document, ctx.page.page);
    log(r, ctx, 0, "recompute");
    return r;
}

// -- Export -------------------------------------------------------------------

ExportRow export_row(const GraveRecord& r) {
    ExportRow row;
    row.document_id = r.document_id;
    row.grave_id = r.publication_grave_id;
    row.page = r.page_index;
    row.width_cm = r.measurements.width_cm;
    row.length_cm = r.measurements.length_cm;
    row.depth_cm = r.measurements.depth_cm;
    row.grave_bearing_deg = r.measurements.grave_bearing_deg;
    for (const auto& s : r.skeletons) row.skeletons.push_back({std::string(to_string(s.pose)), s.bearing_deg});
    if (r.conversion) row.px_per_cm = r.conversion->px_per_cm;
    return row;
}

namespace {

std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\n\r") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string csv_number(const std::optional<double>& v) { return v ? format_rounded(*v) : std::string(); }

std::vector<std::vector<std::string>> split_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        any = true;
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field += c;
        }
    }
    if (quoted) throw Error(ErrorCode::SchemaError, "unterminated quote in CSV");
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::optional<double> csv_value(const std::string& s, const char* column) {
    if (s.empty()) return std::nullopt;
    const auto v = parse_double(s);
    if (!v) throw Error(ErrorCode::SchemaError, std::string("bad number in ") + column + ": '" + s + "'");
    return v;
}

const std::array<const char*, 8> kBaseColumns{"document_id", "grave_id",  "page",
                                              "width_cm",    "length_cm", "depth_cm",
                                              "grave_bearing_deg", "n_skeletons"};

}  // namespace

std::string export_rows_csv(const std::vector<ExportRow>& rows) {
    std::size_t max_skeletons = 0;
    for (const auto& r : rows) max_skeletons = std::max(max_skeletons, r.skeletons.size());
    std::string out;
    for (std::size_t i = 0; i < kBaseColumns.size(); ++i) {
        if (i > 0) out += ',';
        out += kBaseColumns[i];
    }
    for (std::size_t i = 1; i <= max_skeletons; ++i) {
        out += ",pose_" + std::to_string(i) + ",skeleton_bearing_" + std::to_string(i) + "_deg";
    }
    out += '\n';
    for (const auto& r : rows) {
        out += csv_field(r.document_id) + ',' + csv_field(r.grave_id) + ',' + std::to_string(r.page) + ',';
        out += csv_number(r.width_cm) + ',' + csv_number(r.length_cm) + ',' + csv_number(r.depth_cm) + ',';
        out += csv_number(r.grave_bearing_deg) + ',' + std::to_string(r.skeletons.size());
        for (std::size_t i = 0; i < max_skeletons; ++i) {
            if (i < r.skeletons.size()) {
                out += ',' + csv_field(r.skeletons[i].pose) + ',' + csv_number(r.skeletons[i].bearing_deg);
            } else {
                out += ",,";
            }
        }
        out += '\n';
    }
    return out;
}

std::string export_records(const std::vector<GraveRecord>& records, ExportFormat format, bool include_all) {
    std::vector<const GraveRecord*> chosen;
    for (const auto& r : records) {
        if (include_all || r.status == ValidationStatus::Validated) chosen.push_back(&r);
    }
    if (format == ExportFormat::json) {
        ojson arr = ojson::array();
        for (const GraveRecord* r : chosen) arr.push_back(to_json(*r));
        return arr.dump(2) + "\n";
    }
    std::vector<ExportRow> rows;
    rows.reserve(chosen.size());
    for (const GraveRecord* r : chosen) rows.push_back(export_row(*r));
    return export_rows_csv(rows);
}

std::vector<ExportRow> parse_export_csv(std::string_view csv) {
    const auto table = split_csv(csv);
    if (table.empty()) throw Error(ErrorCode::SchemaError, "CSV has no header");
    const auto& header = table.front();
    if (header.size() < kBaseColumns.size() || (header.size() - kBaseColumns.size()) % 2 != 0) {
        throw Error(ErrorCode::SchemaError, "unexpected CSV header");
    }
    for (std::size_t i = 0; i < kBaseColumns.size(); ++i) {
        if (header[i] != kBaseColumns[i]) {
            throw Error(ErrorCode::SchemaError, "column " + std::to_string(i + 1) + " should be " + kBaseColumns[i]);
        }
    }
    std::vector<ExportRow> rows;
    for (std::size_t li = 1; li < table.size(); ++li) {
        const auto& f = table[li];
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() != header.size()) {
            throw Error(ErrorCode::SchemaError, "line " + std::to_string(li + 1) + " has " + std::to_string(f.size()) +
                                                    " fields, expected " + std::to_string(header.size()));
        }
        ExportRow r;
        r.document_id = f[0];
        r.grave_id = f[1];
        const auto page = parse_double(f[2]);
        if (!page) throw Error(ErrorCode::SchemaError, "bad page on line " + std::to_string(li + 1));
        r.page = static_cast<int>(*page);
        r.width_cm = csv_value(f[3], "width_cm");
        r.length_cm = csv_value(f[4], "length_cm");
        r.depth_cm = csv_value(f[5], "depth_cm");
        r.grave_bearing_deg = csv_value(f[6], "grave_bearing_deg");
        const auto n = parse_double(f[7]);
        if (!n || *n < 0) throw Error(ErrorCode::SchemaError, "bad n_skeletons on line " + std::to_string(li + 1));
        for (std::size_t i = 0; i < static_cast<std::size_t>(*n); ++i) {
            const std::size_t col = kBaseColumns.size() + 2 * i;
            if (col + 1 >= f.size()) throw Error(ErrorCode::SchemaError, "missing skeleton columns");
            r.skeletons.push_back({f[col], csv_value(f[col + 1], "skeleton_bearing")});
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<GraveRecord> parse_export_json(std::string_view text) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, e.what());
    }
    if (!arr.is_array()) throw Error(ErrorCode::SchemaError, "JSON export must be an array");
    std::vector<GraveRecord> out;
    out.reserve(arr.size());
    for (const auto& j : arr) out.push_back(record_from_json(j));
    return out;
}

std::vector<ExportRow> export_rows_from_json(std::string_view text) {
    std::vector<ExportRow> rows;
    for (const auto& r : parse_export_json(text)) rows.push_back(export_row(r));
    return rows;
}

// -- Baseline comparison --------------------------------------------------------

namespace {

double relative_pct(double c, double b) { return std::abs(c - b) / std::abs(b) * 100.0; }

double circular_pct(double c, double b, double period) {
    double d = std::fmod(std::abs(c - b), period);
    d = std::min(d, period - d);
    return d / period * 100.0;
}

}  // namespace

BaselineComparison compare_to_baseline(const std::vector<ExportRow>& candidate, const std::vector<ExportRow>& baseline) {
    std::map<std::string, const ExportRow*> base;
    for (const auto& b : baseline) base.emplace(b.grave_id, &b);

    BaselineComparison out;
    double total = 0.0;
    for (const auto& c : candidate) {
        const auto it = base.find(c.grave_id);
        if (it == base.end() || out.per_grave_error_pct.contains(c.grave_id)) continue;
        const ExportRow& b = *it->second;
        double err = 0.0;
        auto linear = [&](const std::optional<double>& cv, const std::optional<double>& bv) {
            if (cv && bv && *bv != 0.0) err += relative_pct(*cv, *bv);
        };
        linear(c.width_cm, b.width_cm);
        linear(c.length_cm, b.length_cm);
        linear(c.depth_cm, b.depth_cm);
        if (c.grave_bearing_deg && b.grave_bearing_deg) {
            err += circular_pct(*c.grave_bearing_deg, *b.grave_bearing_deg, 180.0);
        }
        if (!b.skeletons.empty()) {
            err += relative_pct(static_cast<double>(c.skeletons.size()), static_cast<double>(b.skeletons.size()));
        }
        const std::size_t n = std::min(c.skeletons.size(), b.skeletons.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (c.skeletons[i].bearing_deg && b.skeletons[i].bearing_deg) {
                err += circular_pct(*c.skeletons[i].bearing_deg, *b.skeletons[i].bearing_deg, 360.0);
            }
        }
        out.per_grave_error_pct[c.grave_id] = err;
        total += err;
    }
    out.n_compared = static_cast<int>(out.per_grave_error_pct.size());
    if (out.n_compared == 0) throw Error(ErrorCode::NoMatchedGraves, "no grave ids in common");
    out.mean_error_pct = total / out.n_compared;
    return out;
}

}  // namespace gravekit
