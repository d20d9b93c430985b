#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

#include "omr/detections.hpp"
#include "omr/geometry.hpp"
#include "omr/notation.hpp"

namespace omr {

// Bipartite affinities between detected symbols (rows) and ground-truth
// symbols (columns): overlap times the probability the detector assigns to
// the ground-truth class.
struct WeightMatrix {
    int num_detected = 0;
    int num_ground_truth = 0;
    std::vector<double> values;  // row-major

    double at(int det, int gt) const {
        return values[static_cast<std::size_t>(det) *
                          static_cast<std::size_t>(num_ground_truth) +
                      static_cast<std::size_t>(gt)];
    }
    double& at(int det, int gt) {
        return values[static_cast<std::size_t>(det) *
                          static_cast<std::size_t>(num_ground_truth) +
                      static_cast<std::size_t>(gt)];
    }
};

inline WeightMatrix build_weight_matrix(const DetectionSet& det, const NotationGraph& gt) {
    if (!det.document_id.empty() && !gt.document_id.empty() &&
        det.document_id != gt.document_id)
        throw std::invalid_argument("build_weight_matrix: document mismatch ('" +
                                    det.document_id + "' vs '" + gt.document_id + "')");
    WeightMatrix w;
    w.num_detected = static_cast<int>(det.nodes.size());
    w.num_ground_truth = static_cast<int>(gt.nodes.size());
    w.values.assign(static_cast<std::size_t>(w.num_detected) *
                        static_cast<std::size_t>(w.num_ground_truth),
                    0.0);
    for (int i = 0; i < w.num_detected; ++i) {
        const auto& d = det.nodes[static_cast<std::size_t>(i)];
        for (int j = 0; j < w.num_ground_truth; ++j) {
            const auto& g = gt.nodes[static_cast<std::size_t>(j)];
            if (g.class_id < 0 || g.class_id >= static_cast<int>(d.probs.size()))
                throw std::invalid_argument(
                    "build_weight_matrix: vocabulary size mismatch (class id " +
                    std::to_string(g.class_id) + " vs " +
                    std::to_string(d.probs.size()) + " probabilities)");
            const double overlap = iou(d.bbox, g.bbox);
            if (overlap > 0.0)
                w.at(i, j) = overlap * d.probs[static_cast<std::size_t>(g.class_id)];
        }
    }
    return w;
}

struct MatchPair {
    int det = 0;
    int gt = 0;
    friend bool operator==(const MatchPair&, const MatchPair&) = default;
    friend bool operator<(const MatchPair& a, const MatchPair& b) {
        return a.det != b.det ? a.det < b.det : a.gt < b.gt;
    }
};

namespace detail {

// Kuhn-Munkres with potentials on a square cost matrix (minimization,
// 1-indexed internally). Returns col -> row assignment. O(n^3).
inline std::vector<int> solve_assignment_min(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> assigned_row(static_cast<std::size_t>(n) + 1, 0);  // per column
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        assigned_row[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = assigned_row[static_cast<std::size_t>(j0)];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost[static_cast<std::size_t>(i0 - 1)]
                                       [static_cast<std::size_t>(j - 1)] -
                                   u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(assigned_row[static_cast<std::size_t>(j)])] +=
                        delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (assigned_row[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            assigned_row[static_cast<std::size_t>(j0)] =
                assigned_row[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> col_to_row(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        col_to_row[static_cast<std::size_t>(j - 1)] =
            assigned_row[static_cast<std::size_t>(j)] - 1;
    return col_to_row;
}

}  // namespace detail

// Maximum-weight bipartite matching. Edges of weight zero cannot contribute,
// so the graph is first split into connected components over positive-weight
// edges and a dense square assignment is solved per component; this keeps the
// O(n^3) core on the small overlap clusters a page actually produces.
// Zero-weight pairs never appear in the result. Deterministic.
inline std::vector<MatchPair> max_weight_matching(const WeightMatrix& w) {
    const int nd = w.num_detected;
    const int ng = w.num_ground_truth;
    for (double x : w.values)
        if (!(x >= 0.0) || !std::isfinite(x))
            throw std::invalid_argument("max_weight_matching: weights must be finite and >= 0");

    // Union-find over detected (0..nd-1) and ground-truth (nd..nd+ng-1).
    std::vector<int> parent(static_cast<std::size_t>(nd + ng));
    for (int i = 0; i < nd + ng; ++i) parent[static_cast<std::size_t>(i)] = i;
    const auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    bool any_positive = false;
    for (int i = 0; i < nd; ++i) {
        for (int j = 0; j < ng; ++j) {
            if (w.at(i, j) > 0.0) {
                any_positive = true;
                const int a = find(i), b = find(nd + j);
                if (a != b) parent[static_cast<std::size_t>(a)] = b;
            }
        }
    }
    if (!any_positive) return {};

    std::map<int, std::pair<std::vector<int>, std::vector<int>>> components;
    for (int i = 0; i < nd; ++i) components[find(i)].first.push_back(i);
    for (int j = 0; j < ng; ++j) components[find(nd + j)].second.push_back(j);

    std::vector<MatchPair> result;
    for (auto& [root, comp] : components) {
        const auto& rows = comp.first;
        const auto& cols = comp.second;
        if (rows.empty() || cols.empty()) continue;
        const int k = static_cast<int>(std::max(rows.size(), cols.size()));
        std::vector<std::vector<double>> cost(
            static_cast<std::size_t>(k),
            std::vector<double>(static_cast<std::size_t>(k), 0.0));
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < cols.size(); ++c)
                cost[r][c] = -w.at(rows[r], cols[c]);
        const std::vector<int> col_to_row = detail::solve_assignment_min(cost);
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const int r = col_to_row[c];
            if (r < 0 || r >= static_cast<int>(rows.size())) continue;
            const MatchPair pair{rows[static_cast<std::size_t>(r)], cols[c]};
            if (w.at(pair.det, pair.gt) > 0.0) result.push_back(pair);
        }
    }
    std::sort(result.begin(), result.end());
    return result;
}

// Total weight summed in (det, gt) order so that independently computed
// matchings of the same weight compare bit-for-bit.
inline double matching_total_weight(std::span<const MatchPair> pairs, const WeightMatrix& w) {
    std::vector<MatchPair> sorted(pairs.begin(), pairs.end());
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    for (const auto& p : sorted) total += w.at(p.det, p.gt);
    return total;
}

// Thresholded matching function: ground-truth index -> detected index for
// every matched pair whose weight strictly exceeds t_match.
struct MatchFunction {
    std::map<int, int> gt_to_det;
    double t_match = 0.05;

    bool matched(int gt) const { return gt_to_det.count(gt) > 0; }
    int detected_for(int gt) const { return gt_to_det.at(gt); }
};

inline MatchFunction threshold_matching(std::span<const MatchPair> pairs,
                                        const WeightMatrix& w, double t_match = 0.05) {
    if (!(t_match >= 0.0) || !(t_match < 1.0))
        throw std::invalid_argument("threshold_matching: t_match must be in [0,1)");
    MatchFunction m;
    m.t_match = t_match;
    std::vector<int> det_seen;
    for (const auto& p : pairs) {
        if (w.at(p.det, p.gt) > t_match) {
            if (!m.gt_to_det.emplace(p.gt, p.det).second)
                throw std::invalid_argument("threshold_matching: ground-truth node " +
                                            std::to_string(p.gt) + " matched twice");
            det_seen.push_back(p.det);
        }
    }
    std::sort(det_seen.begin(), det_seen.end());
    if (std::adjacent_find(det_seen.begin(), det_seen.end()) != det_seen.end())
        throw std::invalid_argument("threshold_matching: detected node matched twice");
    return m;
}

// Transport ground-truth edges onto detected nodes: keep edges with both
// endpoints matched, as canonical (min,max) detected-index pairs, deduplicated.
inline std::vector<std::pair<int, int>> map_ground_truth_edges(const NotationGraph& gt,
                                                               const MatchFunction& m) {
    const auto index = gt.id_index();
    std::vector<std::pair<int, int>> mapped;
    for (const auto& e : gt.edges) {
        const auto a = index.find(e.first);
        const auto b = index.find(e.second);
        if (a == index.end() || b == index.end())
            throw std::invalid_argument("map_ground_truth_edges: edge references node " +
                                        std::to_string(a == index.end() ? e.first : e.second) +
                                        " absent from the graph");
        if (!m.matched(a->second) || !m.matched(b->second)) continue;
        int da = m.detected_for(a->second);
        int db = m.detected_for(b->second);
        if (da > db) std::swap(da, db);
        mapped.emplace_back(da, db);
    }
    std::sort(mapped.begin(), mapped.end());
    mapped.erase(std::unique(mapped.begin(), mapped.end()), mapped.end());
    return mapped;
}

inline nlohmann::json matching_debug_json(const WeightMatrix& w,
                                          std::span<const MatchPair> pairs,
                                          const MatchFunction& m) {
    nlohmann::json weights = nlohmann::json::array();
    for (int i = 0; i < w.num_detected; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < w.num_ground_truth; ++j) row.push_back(w.at(i, j));
        weights.push_back(std::move(row));
    }
    nlohmann::json matching = nlohmann::json::array();
    for (const auto& p : pairs)
        matching.push_back({{"det", p.det}, {"gt", p.gt}, {"weight", w.at(p.det, p.gt)}});
    nlohmann::json kept = nlohmann::json::array();
    for (const auto& [gt, det] : m.gt_to_det) kept.push_back({{"gt", gt}, {"det", det}});
    return {{"weights", weights},
            {"matching", matching},
            {"t_match", m.t_match},
            {"match_function", kept}};
}

}  // namespace omr
