#include "gravekit/ingest.hpp"

#include "gravekit/error.hpp"
#include "gravekit/store.hpp"

#include <algorithm>
#include <filesystem>

namespace gravekit {

std::string_view to_string(ScaleMode mode) noexcept {
    return mode == ScaleMode::FixedRatio ? "FixedRatio" : "PerDrawing";
}

void validate_scale_config(const ScaleConfig& config) {
    if (config.mode != ScaleMode::FixedRatio) return;
    if (!config.fixed_ratio || !(*config.fixed_ratio > 0.0)) {
        throw Error(ErrorCode::InvalidScaleConfig, "FixedRatio requires a positive fixed_ratio");
    }
    if (!config.page_height_cm || !(*config.page_height_cm > 0.0)) {
        throw Error(ErrorCode::InvalidScaleConfig, "FixedRatio requires a positive page_height_cm");
    }
}

Document import_document(Store& store, const DocumentMeta& meta, std::span<const PageSource> pages) {
    if (pages.empty()) throw Error(ErrorCode::EmptyDocument, "document has no pages");
    validate_scale_config(meta.scale);

    std::vector<Page> rows;
    std::vector<std::vector<std::uint8_t>> images;
    rows.reserve(pages.size());
    images.reserve(pages.size());
    for (std::size_t i = 0; i < pages.size(); ++i) {
        const PageSource& src = pages[i];
        DecodedPng decoded;
        try {
            decoded = decode_png(src.png_bytes);
        } catch (const Error& e) {
            throw Error(ErrorCode::UndecodableRaster, "page " + std::to_string(i) + ": " + e.what());
        }
        if (decoded.width <= 0 || decoded.height <= 0) {
            throw Error(ErrorCode::UndecodableRaster, "page " + std::to_string(i) + ": empty raster");
        }
        if (src.dpi && !(*src.dpi > 0.0)) {
            throw Error(ErrorCode::UndecodableRaster, "page " + std::to_string(i) + ": dpi must be positive");
        }
        Page p;
        p.index = static_cast<int>(i);
        p.width_px = decoded.width;
        p.height_px = decoded.height;
        p.dpi = src.dpi;
        p.image_ref = src.image_ref.empty() ? "page-" + std::to_string(i) + ".png" : src.image_ref;
        rows.push_back(std::move(p));
        images.push_back(src.png_bytes);
    }
    return store.insert_document(meta, rows, images);
}

GrayImage get_page_raster(const Store& store, const std::string& page_id) {
    const auto bytes = store.page_image(page_id);
    return decode_png_gray(bytes);
}

nlohmann::json manifest_json(const Document& document, const std::vector<Page>& pages) {
    nlohmann::json j;
    j["id"] = document.id;
    j["title"] = document.title;
    j["source_ref"] = document.source_ref;
    j["page_count"] = document.page_count;
    j["scale_mode"] = to_string(document.scale.mode);
    j["fixed_ratio"] = document.scale.fixed_ratio ? nlohmann::json(*document.scale.fixed_ratio) : nlohmann::json();
    j["page_height_cm"] =
        document.scale.page_height_cm ? nlohmann::json(*document.scale.page_height_cm) : nlohmann::json();
    j["pages"] = nlohmann::json::array();
    for (const Page& p : pages) {
        j["pages"].push_back({{"id", p.id},
                              {"document_id", p.document_id},
                              {"index", p.index},
                              {"width_px", p.width_px},
                              {"height_px", p.height_px},
                              {"dpi", p.dpi ? nlohmann::json(*p.dpi) : nlohmann::json()},
                              {"image_ref", p.image_ref}});
    }
    return j;
}

namespace {

std::optional<double> optional_number(const nlohmann::json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) throw Error(ErrorCode::InvalidScaleConfig, std::string(key) + " must be a number");
    return it->get<double>();
}

}  // namespace

Manifest read_manifest(const nlohmann::json& manifest, const std::string& base_dir) {
    if (!manifest.is_object()) throw Error(ErrorCode::SchemaError, "manifest must be a JSON object");
    Manifest out;
    out.meta.title = manifest.value("title", std::string());
    out.meta.source_ref = manifest.value("source_ref", std::string());
    const std::string mode = manifest.value("scale_mode", std::string("PerDrawing"));
    if (mode == "FixedRatio") out.meta.scale.mode = ScaleMode::FixedRatio;
    else if (mode == "PerDrawing") out.meta.scale.mode = ScaleMode::PerDrawing;
    else throw Error(ErrorCode::InvalidScaleConfig, "unknown scale_mode '" + mode + "'");
    out.meta.scale.fixed_ratio = optional_number(manifest, "fixed_ratio");
    out.meta.scale.page_height_cm = optional_number(manifest, "page_height_cm");

    const auto pages = manifest.find("pages");
    if (pages == manifest.end() || !pages->is_array()) return out;
    std::vector<std::pair<int, PageSource>> indexed;
    for (std::size_t i = 0; i < pages->size(); ++i) {
        const auto& p = (*pages)[i];
        if (!p.is_object() || !p.contains("image_ref") || !p["image_ref"].is_string()) {
            throw Error(ErrorCode::SchemaError, "pages[" + std::to_string(i) + "] needs an image_ref");
        }
        PageSource src;
        src.image_ref = p["image_ref"].get<std::string>();
        if (p.contains("dpi") && p["dpi"].is_number()) src.dpi = p["dpi"].get<double>();
        std::filesystem::path path(src.image_ref);
        if (path.is_relative() && !base_dir.empty()) path = std::filesystem::path(base_dir) / path;
        try {
            src.png_bytes = read_file_bytes(path.string());
        } catch (const Error& e) {
            throw Error(ErrorCode::UndecodableRaster, "page " + std::to_string(i) + ": " + e.what());
        }
        const int index = p.contains("index") && p["index"].is_number_integer() ? p["index"].get<int>()
                                                                                : static_cast<int>(i);
        indexed.emplace_back(index, std::move(src));
    }
    std::stable_sort(indexed.begin(), indexed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [index, src] : indexed) out.pages.push_back(std::move(src));
    return out;
}

}  // namespace gravekit
