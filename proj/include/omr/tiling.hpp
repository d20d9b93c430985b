#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "omr/detections.hpp"
#include "omr/geometry.hpp"

namespace omr {

struct Tile {
    BBox core;      // region this tile owns on the page
    BBox extended;  // core grown by the margin, clipped to the page
};

struct TilePlan {
    std::vector<Tile> tiles;
    double page_width = 0.0;
    double page_height = 0.0;
    double crop_size = 0.0;
    double margin = 0.0;
};

// Core tiles on a crop_size grid, last row/column shifted to abut the page
// edge; extended rects add `margin` context on every side, clipped to page.
inline TilePlan tile_plan(double page_width, double page_height, double crop_size = 1216.0,
                          double margin = 128.0) {
    if (!(page_width > 0.0) || !(page_height > 0.0))
        throw std::invalid_argument("tile_plan: page size must be positive");
    if (!(crop_size > 0.0) || !(margin > 0.0))
        throw std::invalid_argument("tile_plan: crop_size and margin must be positive");
    if (margin >= crop_size / 2.0)
        throw std::invalid_argument("tile_plan: margin must be below crop_size/2");

    const auto offsets = [crop_size](double extent) {
        std::vector<double> starts;
        if (extent <= crop_size) {
            starts.push_back(0.0);
            return starts;
        }
        const int count = static_cast<int>(std::ceil(extent / crop_size));
        for (int k = 0; k < count; ++k)
            starts.push_back(std::min(k * crop_size, extent - crop_size));
        return starts;
    };

    TilePlan plan;
    plan.page_width = page_width;
    plan.page_height = page_height;
    plan.crop_size = crop_size;
    plan.margin = margin;
    for (double top : offsets(page_height)) {
        for (double left : offsets(page_width)) {
            Tile t;
            t.core = BBox{top, left, std::min(top + crop_size, page_height),
                          std::min(left + crop_size, page_width)};
            t.extended = BBox{std::max(0.0, t.core.top - margin),
                              std::max(0.0, t.core.left - margin),
                              std::min(page_height, t.core.bottom + margin),
                              std::min(page_width, t.core.right + margin)};
            plan.tiles.push_back(t);
        }
    }
    return plan;
}

inline nlohmann::json tile_plan_to_json(const TilePlan& plan) {
    nlohmann::json tiles = nlohmann::json::array();
    for (const auto& t : plan.tiles) {
        tiles.push_back(
            {{"core", {t.core.top, t.core.left, t.core.bottom, t.core.right}},
             {"extended",
              {t.extended.top, t.extended.left, t.extended.bottom, t.extended.right}}});
    }
    return {{"page_width", plan.page_width},
            {"page_height", plan.page_height},
            {"crop_size", plan.crop_size},
            {"margin", plan.margin},
            {"tiles", tiles}};
}

inline TilePlan tile_plan_from_json(const nlohmann::json& j) {
    TilePlan plan;
    plan.page_width = j.at("page_width").get<double>();
    plan.page_height = j.at("page_height").get<double>();
    plan.crop_size = j.at("crop_size").get<double>();
    plan.margin = j.at("margin").get<double>();
    for (const auto& t : j.at("tiles")) {
        const auto box = [](const nlohmann::json& arr) {
            return BBox{arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(),
                        arr[3].get<double>()};
        };
        plan.tiles.push_back(Tile{box(t.at("core")), box(t.at("extended"))});
    }
    return plan;
}

// Consolidate per-tile detections (in tile-local coordinates, origin at the
// extended rect) into one page-level set. A detection is attributed to the
// tile whose core contains its center, so objects straddling tile borders are
// counted once; survivors then go through greedy IoU suppression ordered by
// max class probability (ties by top, then left).
inline DetectionSet merge_detections(
    const std::vector<std::pair<Tile, DetectionSet>>& per_tile, double iou_threshold) {
    if (!(iou_threshold > 0.0) || !(iou_threshold < 1.0))
        throw std::invalid_argument("merge_detections: iou_threshold must be in (0,1)");

    double page_width = 0.0, page_height = 0.0;
    for (const auto& [tile, _] : per_tile) {
        page_width = std::max(page_width, tile.core.right);
        page_height = std::max(page_height, tile.core.bottom);
    }

    std::string document_id;
    std::vector<DetectedNode> owned;
    for (const auto& [tile, set] : per_tile) {
        if (document_id.empty() && !set.document_id.empty()) {
            document_id = set.document_id;
            if (const auto cut = document_id.find('#'); cut != std::string::npos)
                document_id.resize(cut);
        }
        const double ext_w = tile.extended.width();
        const double ext_h = tile.extended.height();
        for (const auto& node : set.nodes) {
            const BBox& b = node.bbox;
            if (b.top < -1e-9 || b.left < -1e-9 || b.bottom > ext_h + 1e-9 ||
                b.right > ext_w + 1e-9)
                throw std::invalid_argument(
                    "merge_detections: box outside its tile's extended rect in tile set '" +
                    set.document_id + "'");
            DetectedNode moved = node;
            moved.bbox = BBox{b.top + tile.extended.top, b.left + tile.extended.left,
                              b.bottom + tile.extended.top, b.right + tile.extended.left};
            // Core ownership is half-open so that grid-adjacent cores do not
            // both claim a center sitting exactly on the shared border.
            const double cx = moved.bbox.center_x();
            const double cy = moved.bbox.center_y();
            if (cx >= tile.core.left && cx < tile.core.right && cy >= tile.core.top &&
                cy < tile.core.bottom)
                owned.push_back(std::move(moved));
        }
    }

    std::stable_sort(owned.begin(), owned.end(), [](const DetectedNode& a,
                                                    const DetectedNode& b) {
        const double pa = a.max_prob(), pb = b.max_prob();
        if (pa != pb) return pa > pb;
        if (a.bbox.top != b.bbox.top) return a.bbox.top < b.bbox.top;
        return a.bbox.left < b.bbox.left;
    });

    DetectionSet merged;
    merged.document_id = document_id;
    merged.page_width = page_width;
    merged.page_height = page_height;
    for (auto& candidate : owned) {
        bool suppressed = false;
        for (const auto& kept : merged.nodes) {
            if (iou(candidate.bbox, kept.bbox) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) merged.nodes.push_back(std::move(candidate));
    }
    return merged;
}

}  // namespace omr
