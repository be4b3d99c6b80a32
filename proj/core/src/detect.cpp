#include "gravekit/detect.hpp"

#include "gravekit/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace gravekit {

namespace {

constexpr std::array<std::pair<ClassLabel, std::string_view>, 15> kLabelNames{{
    {ClassLabel::text, "text"},
    {ClassLabel::skeleton_photo, "skeleton_photo"},
    {ClassLabel::ceramics, "ceramics"},
    {ClassLabel::artefact, "artefact"},
    {ClassLabel::grave_photo, "grave_photo"},
    {ClassLabel::map, "map"},
    {ClassLabel::scale, "scale"},
    {ClassLabel::arrow, "arrow"},
    {ClassLabel::grave, "grave"},
    {ClassLabel::skeleton, "skeleton"},
    {ClassLabel::grave_artefact, "grave_artefact"},
    {ClassLabel::grave_cross_section, "grave_cross_section"},
    {ClassLabel::stone_tool, "stone_tool"},
    {ClassLabel::shaft_axe, "shaft_axe"},
    {ClassLabel::table, "table"},
}};

[[noreturn]] void schema_error(std::size_t line, std::string_view field, std::string_view what) {
    std::ostringstream msg;
    msg << "line " << line << ", field '" << field << "': " << what;
    throw Error(ErrorCode::SchemaError, msg.str());
}

}  // namespace

std::string_view to_string(ClassLabel label) noexcept {
    for (const auto& [value, name] : kLabelNames) {
        if (value == label) return name;
    }
    return "text";
}

std::optional<ClassLabel> parse_label(std::string_view text) noexcept {
    for (const auto& [value, name] : kLabelNames) {
        if (name == text) return value;
    }
    return std::nullopt;
}

bool is_artefact_label(ClassLabel label) noexcept {
    switch (label) {
        case ClassLabel::artefact:
        case ClassLabel::grave_artefact:
        case ClassLabel::ceramics:
        case ClassLabel::stone_tool:
        case ClassLabel::shaft_axe:
            return true;
        default:
            return false;
    }
}

std::string_view to_string(DetectionOrigin origin) noexcept {
    switch (origin) {
        case DetectionOrigin::Model: return "model";
        case DetectionOrigin::Manual: return "manual";
        case DetectionOrigin::Synthetic: return "synthetic";
    }
    return "model";
}

LabelAliases LabelAliases::with_alternative_names() {
    LabelAliases a;
    a.aliases.emplace("burial", ClassLabel::grave);
    a.aliases.emplace("grave cross section", ClassLabel::grave_cross_section);
    a.aliases.emplace("stone artefacts", ClassLabel::stone_tool);
    a.aliases.emplace("shaft axe", ClassLabel::shaft_axe);
    a.aliases.emplace("grave photo", ClassLabel::grave_photo);
    a.aliases.emplace("grave artefact", ClassLabel::grave_artefact);
    a.aliases.emplace("skeleton photo", ClassLabel::skeleton_photo);
    return a;
}

std::vector<Detection> parse_detections(std::istream& in, const PageLookup& pages,
                                        const ParseOptions& options) {
    using nlohmann::json;
    std::vector<Detection> out;
    std::unordered_map<std::string, int> per_page_count;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            schema_error(line_no, "<line>", e.what());
        }
        if (!obj.is_object()) schema_error(line_no, "<line>", "not a JSON object");

        Detection det;
        if (auto it = obj.find("page_id"); it != obj.end()) {
            if (!it->is_string()) schema_error(line_no, "page_id", "expected string");
            det.page_id = it->get<std::string>();
        } else if (options.default_page_id) {
            det.page_id = *options.default_page_id;
        } else {
            schema_error(line_no, "page_id", "missing");
        }

        auto label_it = obj.find("label");
        if (label_it == obj.end() || !label_it->is_string()) schema_error(line_no, "label", "expected string");
        const auto raw_label = label_it->get<std::string>();
        if (auto alias = options.aliases.aliases.find(raw_label); alias != options.aliases.aliases.end()) {
            det.label = alias->second;
        } else if (auto parsed = parse_label(raw_label)) {
            det.label = *parsed;
        } else {
            throw Error(ErrorCode::UnknownLabel,
                        "line " + std::to_string(line_no) + ": '" + raw_label + "'");
        }

        auto bbox_it = obj.find("bbox");
        if (bbox_it == obj.end() || !bbox_it->is_array() || bbox_it->size() != 4) {
            schema_error(line_no, "bbox", "expected array of 4 numbers");
        }
        std::array<double, 4> v{};
        for (std::size_t k = 0; k < 4; ++k) {
            const json& e = (*bbox_it)[k];
            if (!e.is_number()) schema_error(line_no, "bbox", "expected array of 4 numbers");
            v[k] = e.get<double>();
            if (!std::isfinite(v[k])) schema_error(line_no, "bbox", "non-finite coordinate");
        }

        auto conf_it = obj.find("confidence");
        if (conf_it == obj.end() || !conf_it->is_number()) schema_error(line_no, "confidence", "expected number");
        det.confidence = conf_it->get<double>();
        if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
            schema_error(line_no, "confidence", "outside [0, 1]");
        }

        if (auto it = obj.find("origin"); it != obj.end()) {
            const std::string o = it->is_string() ? it->get<std::string>() : std::string();
            if (o == "model") det.origin = DetectionOrigin::Model;
            else if (o == "manual") det.origin = DetectionOrigin::Manual;
            else if (o == "synthetic") det.origin = DetectionOrigin::Synthetic;
            else schema_error(line_no, "origin", "expected model, manual or synthetic");
        }
        if (det.origin == DetectionOrigin::Manual && det.confidence != 1.0) {
            schema_error(line_no, "confidence", "manual detections must have confidence 1");
        }

        const std::optional<PageSize> size = pages(det.page_id);
        if (!size) throw Error(ErrorCode::UnknownPage, "line " + std::to_string(line_no) + ": " + det.page_id);
        det.bbox.x_min = std::clamp(v[0], 0.0, static_cast<double>(size->width_px));
        det.bbox.y_min = std::clamp(v[1], 0.0, static_cast<double>(size->height_px));
        det.bbox.x_max = std::clamp(v[2], 0.0, static_cast<double>(size->width_px));
        det.bbox.y_max = std::clamp(v[3], 0.0, static_cast<double>(size->height_px));
        if (!(det.bbox.x_min < det.bbox.x_max && det.bbox.y_min < det.bbox.y_max)) {
            schema_error(line_no, "bbox", "empty box after clamping to the page");
        }

        const int ordinal = per_page_count[det.page_id]++;
        if (auto it = obj.find("id"); it != obj.end()) {
            if (!it->is_string()) schema_error(line_no, "id", "expected string");
            det.id = it->get<std::string>();
        } else {
            det.id = det.page_id + "#" + std::to_string(ordinal);
        }
        out.push_back(std::move(det));
    }
    return out;
}

std::string serialize_detections(const std::vector<Detection>& detections) {
    std::string out;
    for (const Detection& d : detections) {
        nlohmann::ordered_json obj;
        obj["id"] = d.id;
        obj["page_id"] = d.page_id;
        obj["label"] = std::string(to_string(d.label));
        obj["bbox"] = {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max};
        obj["confidence"] = d.confidence;
        obj["origin"] = std::string(to_string(d.origin));
        out += obj.dump();
        out += '\n';
    }
    return out;
}

std::vector<Detection> filter_by_confidence(const std::vector<Detection>& detections, double threshold) {
    std::vector<Detection> kept;
    kept.reserve(detections.size());
    for (const Detection& d : detections) {
        if (d.confidence >= threshold) kept.push_back(d);
    }
    return kept;
}

}  // namespace gravekit
