// Automated measurement of one grave tree: crops, contours, conversion,
// bearings and outline.

#include "gravekit/error.hpp"
#include "gravekit/records.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gravekit {

namespace {

PixelRect rect_of(const BBox& b, const GrayImage& raster) {
    return covering_rect(b.x_min, b.y_min, b.x_max, b.y_max, raster.width(), raster.height());
}

const Detection* find_detection(const std::vector<Detection>& dets, const std::string& id) {
    for (const Detection& d : dets) {
        if (d.id == id) return &d;
    }
    return nullptr;
}

/// Largest traced contour of a crop, shifted back into page coordinates.
std::optional<Contour> crop_contour(const GrayImage& raster, const BBox& box) {
    const PixelRect r = rect_of(box, raster);
    if (r.empty()) return std::nullopt;
    const auto contours = trace_outer_contours(binarize(crop(raster, r)));
    if (contours.empty()) return std::nullopt;
    Contour c = largest_contour(contours);
    if (c.points.size() < 3) return std::nullopt;
    for (Point2d& p : c.points) {
        p.x += r.x0;
        p.y += r.y0;
    }
    return c;
}

RotatedRect box_rect(const BBox& b) {
    RotatedRect r;
    r.center = {b.center_x(), b.center_y()};
    r.width_px = std::min(b.width(), b.height());
    r.length_px = std::max(b.width(), b.height());
    r.angle_deg = b.height() >= b.width() ? 0.0 : 90.0;
    return r;
}

/// Side of the section rect that runs closest to the image vertical.
double vertical_extent(const RotatedRect& r) {
    const double a = r.angle_deg * std::numbers::pi / 180.0;
    return std::abs(std::cos(a)) >= std::abs(std::sin(a)) ? r.length_px : r.width_px;
}

}  // namespace

GraveTree rebuild_tree(const GraveRecord& record, const std::vector<Detection>& page_detections) {
    const RecordEdits& e = record.edits;
    std::vector<Detection> dets;
    dets.reserve(page_detections.size() + e.added.size() + 1);
    bool have_grave = false;
    for (const Detection& d : page_detections) {
        if (std::find(e.removed.begin(), e.removed.end(), d.id) != e.removed.end()) continue;
        if (d.page_id != record.page_id) continue;
        dets.push_back(d);
        if (d.id == record.tree.grave.id) {
            have_grave = true;
            if (e.grave_bbox) dets.back().bbox = *e.grave_bbox;
        }
    }
    if (!have_grave) {
        Detection g = record.tree.grave;
        if (e.grave_bbox) g.bbox = *e.grave_bbox;
        dets.push_back(g);
    }
    for (const Detection& d : e.added) {
        if (std::find(e.removed.begin(), e.removed.end(), d.id) == e.removed.end()) dets.push_back(d);
    }

    GraveTree tree;
    for (GraveTree& t : assemble_graves(dets)) {
        if (t.grave.id == record.tree.grave.id) {
            tree = std::move(t);
            break;
        }
    }
    auto pin = [&](const std::optional<std::optional<std::string>>& choice, std::optional<Detection>& slot) {
        if (!choice) return;
        slot.reset();
        if (*choice) {
            if (const Detection* d = find_detection(dets, **choice)) slot = *d;
        }
    };
    pin(e.scale_id, tree.scale);
    pin(e.north_arrow_id, tree.north_arrow);
    pin(e.cross_section_id, tree.cross_section);
    return tree;
}

GeometryCache measure_tree(const GraveTree& tree, const RecordEdits& edits, const PageContext& page,
                           const PipelineOptions& options) {
    GeometryCache cache;
    const GrayImage& raster = page.raster;

    if (auto contour = crop_contour(raster, tree.grave.bbox)) {
        try {
            cache.grave_rect = min_area_rect(*contour);
            cache.grave_contour = std::move(contour);
        } catch (const Error& err) {
            cache.issues.push_back(std::string("grave: ") + err.what());
        }
    } else {
        cache.issues.push_back("grave: no contour in the grave box");
    }

    if (tree.scale) {
        const PixelRect r = rect_of(tree.scale->bbox, raster);
        const GrayImage scale_crop = crop(raster, r);
        try {
            cache.scale_pixel_length = measure_scale_pixels(scale_crop);
        } catch (const Error& err) {
            cache.issues.push_back(std::string("scale: ") + err.what());
        }
        if (options.ocr) {
            try {
                cache.ocr_text = options.ocr(scale_crop, *tree.scale);
            } catch (const Error& err) {
                cache.issues.push_back(std::string("ocr: ") + err.what());
            }
        }
    }

    if (tree.cross_section && !edits.manual_section_box) {
        if (auto contour = crop_contour(raster, tree.cross_section->bbox)) {
            try {
                cache.section_rect = min_area_rect(*contour);
            } catch (const Error& err) {
                cache.issues.push_back(std::string("cross-section: ") + err.what());
            }
        } else {
            cache.issues.push_back("cross-section: no contour");
        }
    }

    if (tree.north_arrow) {
        const GrayImage arrow_crop = crop(raster, rect_of(tree.north_arrow->bbox, raster));
        try {
            cache.auto_north =
                north_angle(arrow_crop, options.north_strategy, tree.north_arrow->id, options.arrow_classifier);
        } catch (const Error& err) {
            cache.issues.push_back(std::string("north arrow: ") + err.what());
        }
    }
    return cache;
}

void finalize(GraveRecord& record, const Document& document, const Page& page) {
    const RecordEdits& e = record.edits;
    const GeometryCache& g = record.geometry;
    record.issues = g.issues;
    record.conversion.reset();
    record.scale_bar.reset();

    // Conversion, most explicit source first.
    try {
        if (e.px_per_cm) {
            record.conversion = conversion_manual(*e.px_per_cm);
        } else if (e.fixed_ratio && e.page_height_cm) {
            record.conversion = conversion_from_fixed_ratio(page.height_px, *e.page_height_cm, *e.fixed_ratio);
        } else if (document.scale.mode == ScaleMode::FixedRatio) {
            record.conversion = conversion_from_fixed_ratio(page.height_px, document.scale.page_height_cm.value_or(0),
                                                            document.scale.fixed_ratio.value_or(0));
        } else {
            const std::optional<std::string> text = e.scale_text ? e.scale_text : g.ocr_text;
            if (!record.tree.scale) {
                record.issues.push_back("scale: no scale bar assigned");
            } else if (!text) {
                record.issues.push_back("scale: no label text");
            } else {
                const ScaleLabel label = parse_scale_label(*text);
                if (label.kind == ScaleLabel::Kind::Ratio) {
                    const auto height_cm = e.page_height_cm ? e.page_height_cm : document.scale.page_height_cm;
                    if (height_cm) {
                        record.conversion = conversion_from_fixed_ratio(page.height_px, *height_cm, label.value);
                    } else {
                        record.issues.push_back("scale: ratio label needs the printed page height");
                    }
                } else if (g.scale_pixel_length) {
                    record.scale_bar = make_scale_bar(record.tree.scale->id, *g.scale_pixel_length, *text);
                    record.conversion = conversion_from_scale_bar(*g.scale_pixel_length, record.scale_bar->real_length_cm);
                } else {
                    record.issues.push_back("scale: bar length unknown");
                }
            }
        }
    } catch (const Error& err) {
        record.issues.push_back(std::string("scale: ") + err.what());
    }

    // North.
    record.north.reset();
    if (e.north_angle_deg) {
        const std::string id = record.tree.north_arrow ? record.tree.north_arrow->id : std::string();
        record.north = make_north_arrow(id, *e.north_angle_deg, NorthSource::Manual);
    } else if (record.tree.north_arrow && g.auto_north) {
        record.north = g.auto_north;
    }

    // Grave rectangle.
    record.manual_box = e.manual_grave_box.has_value();
    std::optional<RotatedRect> rect = record.manual_box ? std::optional(box_rect(*e.manual_grave_box)) : g.grave_rect;
    record.needs_manual_box = !record.manual_box && !g.grave_contour;

    record.measurements = {};
    const double ppc = record.conversion ? record.conversion->px_per_cm : 0.0;
    if (rect && record.conversion) {
        record.measurements.width_cm = rect->width_px / ppc;
        record.measurements.length_cm = rect->length_px / ppc;
    }
    if (record.conversion) {
        if (e.manual_section_box) {
            record.measurements.depth_cm = e.manual_section_box->height() / ppc;
        } else if (record.tree.cross_section && g.section_rect) {
            record.measurements.depth_cm = vertical_extent(*g.section_rect) / ppc;
        }
    }
    if (rect && record.north) record.measurements.grave_bearing_deg = grave_bearing(*rect, *record.north).degrees;

    // Skeletons.
    record.skeletons.clear();
    for (const Detection& s : record.tree.skeletons) {
        SkeletonEntry entry;
        entry.detection_id = s.id;
        if (const auto it = e.poses.find(s.id); it != e.poses.end()) entry.pose = it->second;
        if (const auto it = e.spines.find(s.id); it != e.spines.end()) {
            entry.spine = it->second;
            if (record.north) {
                try {
                    entry.bearing_deg = skeleton_bearing(it->second, *record.north).degrees;
                } catch (const Error& err) {
                    record.issues.push_back("skeleton " + s.id + ": " + err.what());
                }
            }
        }
        record.skeletons.push_back(std::move(entry));
    }

    // Outline, only for automatically traced graves.
    record.outline.reset();
    if (!record.manual_box && g.grave_contour && g.grave_rect && record.conversion) {
        try {
            record.outline = normalize_outline(*g.grave_contour, *record.conversion, *g.grave_rect);
            record.outline->source_record_id = record.record_id;
        } catch (const Error& err) {
            record.issues.push_back(std::string("outline: ") + err.what());
        }
    }
}

}  // namespace gravekit
