#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "omr/geometry.hpp"

namespace omr {

enum class ClassMode { Hard, Soft };

// Center-distance gate for candidate pairs, expressed as a fraction of page
// width. Calibrated on training graphs rather than guessed.
struct PairFilterConfig {
    double max_center_distance = 0.5;
    bool saturated = false;  // calibration hit the top of the grid without
                             // reaching the retention target
};

constexpr double kPairFilterGridStep = 0.01;
constexpr double kPairFilterGridMax = 0.50;

namespace detail {

template <typename Graphs>
inline std::vector<double> positive_pair_distances(const Graphs& graphs) {
    std::vector<double> fractions;
    for (const auto& g : graphs) {
        if (!(g.page_width > 0.0))
            throw std::invalid_argument("pair filter: page width must be positive");
        const auto index = g.id_index();
        for (const auto& e : g.edges) {
            const auto& a = g.nodes[static_cast<std::size_t>(index.at(e.first))].bbox;
            const auto& b = g.nodes[static_cast<std::size_t>(index.at(e.second))].bbox;
            fractions.push_back(center_distance(a, b) / g.page_width);
        }
    }
    return fractions;
}

}  // namespace detail

// Smallest grid value of max_center_distance (0.01, 0.02, ..., 0.50) that
// keeps at least `retention_target` of the positive pairs in the training
// graphs. Falls back to the grid maximum (flagged) when nothing reaches it.
template <typename Graphs>
inline PairFilterConfig calibrate_pair_filter(const Graphs& train_graphs,
                                              double retention_target = 0.995) {
    const std::vector<double> fractions = detail::positive_pair_distances(train_graphs);
    if (fractions.empty())
        throw std::invalid_argument("calibrate_pair_filter: no positive pairs in input");
    const auto total = static_cast<double>(fractions.size());
    const int steps = static_cast<int>(std::lround(kPairFilterGridMax / kPairFilterGridStep));
    for (int k = 1; k <= steps; ++k) {
        const double d = k * kPairFilterGridStep;
        std::size_t retained = 0;
        for (double f : fractions)
            if (f <= d) ++retained;
        if (static_cast<double>(retained) >= retention_target * total)
            return PairFilterConfig{d, false};
    }
    return PairFilterConfig{kPairFilterGridMax, true};
}

// All unordered (a,b), a < b, whose centers lie within the distance gate.
inline std::vector<std::pair<int, int>> candidate_pairs(std::span<const BBox> boxes,
                                                        const PairFilterConfig& cfg,
                                                        double page_width) {
    if (!(cfg.max_center_distance > 0.0))
        throw std::invalid_argument("candidate_pairs: max_center_distance must be positive");
    if (!(page_width > 0.0))
        throw std::invalid_argument("candidate_pairs: page width must be positive");
    const double limit = cfg.max_center_distance * page_width;
    std::vector<std::pair<int, int>> pairs;
    const int n = static_cast<int>(boxes.size());
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (center_distance(boxes[static_cast<std::size_t>(a)],
                                boxes[static_cast<std::size_t>(b)]) <= limit)
                pairs.emplace_back(a, b);
    return pairs;
}

// Per-node inputs to feature assembly: normalized box plus class information
// (id for hard mode, probability vector for soft mode; ground-truth nodes in
// soft mode may pass just the id and get a one-hot vector).
struct NodeFeatures {
    std::array<double, 4> bbox{};  // normalized {top, left, bottom, right}
    int class_id = -1;
    std::vector<double> probs;
};

struct PairCandidate {
    int a = 0;
    int b = 0;     // canonical a < b
    int label = 0; // 1 iff the pair is an edge in the supervision set
    std::array<double, 4> bbox_a{};
    std::array<double, 4> bbox_b{};
    int class_a = -1;
    int class_b = -1;
    std::vector<double> probs_a;
    std::vector<double> probs_b;
};

inline PairCandidate assemble_features(int a, int b, const NodeFeatures& fa,
                                       const NodeFeatures& fb, ClassMode mode,
                                       int num_classes, int label) {
    if (a == b) throw std::invalid_argument("assemble_features: self-pair");
    if (a > b) return assemble_features(b, a, fb, fa, mode, num_classes, label);

    PairCandidate pc;
    pc.a = a;
    pc.b = b;
    pc.label = label;
    pc.bbox_a = fa.bbox;
    pc.bbox_b = fb.bbox;
    const auto fill = [&](const NodeFeatures& f, int& class_out,
                          std::vector<double>& probs_out) {
        if (mode == ClassMode::Hard) {
            if (f.class_id < 0 || f.class_id >= num_classes)
                throw std::invalid_argument("assemble_features: class id out of range");
            class_out = f.class_id;
            return;
        }
        if (!f.probs.empty()) {
            if (static_cast<int>(f.probs.size()) != num_classes)
                throw std::invalid_argument(
                    "assemble_features: probability vector length mismatch");
            probs_out = f.probs;
        } else {
            if (f.class_id < 0 || f.class_id >= num_classes)
                throw std::invalid_argument("assemble_features: class id out of range");
            probs_out.assign(static_cast<std::size_t>(num_classes), 0.0);
            probs_out[static_cast<std::size_t>(f.class_id)] = 1.0;
        }
    };
    fill(fa, pc.class_a, pc.probs_a);
    fill(fb, pc.class_b, pc.probs_b);
    return pc;
}

}  // namespace omr
