#include "gravekit/assemble.hpp"

#include "gravekit/error.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace gravekit {

double bbox_center_distance(const Detection& a, const Detection& b) {
    if (a.page_id != b.page_id) {
        throw Error(ErrorCode::PageMismatch, a.page_id + " vs " + b.page_id);
    }
    return std::hypot(a.bbox.center_x() - b.bbox.center_x(), a.bbox.center_y() - b.bbox.center_y());
}

bool contained_in(const BBox& object, const BBox& container) noexcept {
    const double cx = object.center_x();
    const double cy = object.center_y();
    if (cx < container.x_min || cx > container.x_max || cy < container.y_min || cy > container.y_max) {
        return false;
    }
    const double ix = std::min(object.x_max, container.x_max) - std::max(object.x_min, container.x_min);
    const double iy = std::min(object.y_max, container.y_max) - std::max(object.y_min, container.y_min);
    if (ix <= 0.0 || iy <= 0.0) return false;
    return ix * iy >= kContainmentOverlap * object.area();
}

bool reading_order_less(const Detection& a, const Detection& b) noexcept {
    return std::tie(a.bbox.y_min, a.bbox.x_min, a.bbox.y_max, a.bbox.x_max, a.id) <
           std::tie(b.bbox.y_min, b.bbox.x_min, b.bbox.y_max, b.bbox.x_max, b.id);
}

namespace {

std::optional<Detection> nearest(const Detection& grave, const std::vector<const Detection*>& candidates) {
    const Detection* best = nullptr;
    double best_distance = 0.0;
    for (const Detection* c : candidates) {
        const double d = bbox_center_distance(grave, *c);
        if (best == nullptr || d < best_distance || (d == best_distance && reading_order_less(*c, *best))) {
            best = c;
            best_distance = d;
        }
    }
    if (best == nullptr) return std::nullopt;
    return *best;
}

}  // namespace

std::vector<GraveTree> assemble_graves(const std::vector<Detection>& page_detections) {
    std::vector<const Detection*> graves, scales, arrows, sections, skeletons, artefacts;
    for (const Detection& d : page_detections) {
        switch (d.label) {
            case ClassLabel::grave: graves.push_back(&d); break;
            case ClassLabel::scale: scales.push_back(&d); break;
            case ClassLabel::arrow: arrows.push_back(&d); break;
            case ClassLabel::grave_cross_section: sections.push_back(&d); break;
            case ClassLabel::skeleton: skeletons.push_back(&d); break;
            default:
                if (is_artefact_label(d.label)) artefacts.push_back(&d);
                break;
        }
    }
    auto by_reading_order = [](const Detection* a, const Detection* b) { return reading_order_less(*a, *b); };
    std::stable_sort(graves.begin(), graves.end(), by_reading_order);
    std::stable_sort(skeletons.begin(), skeletons.end(), by_reading_order);
    std::stable_sort(artefacts.begin(), artefacts.end(), by_reading_order);

    std::vector<GraveTree> trees;
    trees.reserve(graves.size());
    for (const Detection* g : graves) {
        GraveTree tree;
        tree.grave = *g;
        tree.scale = nearest(*g, scales);
        tree.north_arrow = nearest(*g, arrows);
        tree.cross_section = nearest(*g, sections);
        for (const Detection* s : skeletons) {
            if (s->page_id == g->page_id && contained_in(s->bbox, g->bbox)) tree.skeletons.push_back(*s);
        }
        for (const Detection* a : artefacts) {
            if (a->page_id == g->page_id && contained_in(a->bbox, g->bbox)) tree.artefacts.push_back(*a);
        }
        trees.push_back(std::move(tree));
    }
    return trees;
}

}  // namespace gravekit
