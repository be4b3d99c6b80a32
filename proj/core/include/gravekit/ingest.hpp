#pragma once

#include "gravekit/image.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gravekit {

class Store;

enum class ScaleMode { PerDrawing, FixedRatio };

struct ScaleConfig {
    ScaleMode mode = ScaleMode::PerDrawing;
    std::optional<double> fixed_ratio;     // 1:20 is stored as 20
    std::optional<double> page_height_cm;  // printed page height, FixedRatio only
};

/// Throws InvalidScaleConfig when FixedRatio lacks a positive ratio or page height.
void validate_scale_config(const ScaleConfig& config);

struct Document {
    std::string id;
    std::string title;
    std::string source_ref;
    int page_count = 0;
    ScaleConfig scale;
};

struct Page {
    std::string id;
    std::string document_id;
    int index = 0;
    int width_px = 0;
    int height_px = 0;
    std::optional<double> dpi;
    std::string image_ref;
};

/// One already-rasterised page (PDF conversion happens outside the engine).
struct PageSource {
    std::vector<std::uint8_t> png_bytes;
    std::optional<double> dpi;
    std::string image_ref;
};

struct DocumentMeta {
    std::string title;
    std::string source_ref;
    ScaleConfig scale;
};

/// Validates and stores all pages or none. Page ids are "<document_id>-p<index>".
Document import_document(Store& store, const DocumentMeta& meta, std::span<const PageSource> pages);

/// Luminance raster of the stored page image.
GrayImage get_page_raster(const Store& store, const std::string& page_id);

// Manifest files use the snake_case field names of Document and Page.
nlohmann::json manifest_json(const Document& document, const std::vector<Page>& pages);

struct Manifest {
    DocumentMeta meta;
    std::vector<PageSource> pages;
};

/// Reads a manifest; page `image_ref`s are resolved relative to `base_dir`.
Manifest read_manifest(const nlohmann::json& manifest, const std::string& base_dir);

std::string_view to_string(ScaleMode mode) noexcept;

}  // namespace gravekit
