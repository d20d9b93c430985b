#pragma once

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "omr/geometry.hpp"
#include "omr/vocab.hpp"

namespace omr {

struct GroundTruthNode {
    long long id = 0;  // document-unique
    BBox bbox;
    int class_id = 0;
};

// Annotated symbols plus their pairwise relationships. Edges are stored
// undirected as canonical (min id, max id) pairs; direction is recovered from
// the grammar when needed.
struct NotationGraph {
    std::string document_id;
    double page_width = 0.0;
    double page_height = 0.0;
    std::vector<GroundTruthNode> nodes;
    std::vector<std::pair<long long, long long>> edges;

    std::unordered_map<long long, int> id_index() const {
        std::unordered_map<long long, int> index;
        index.reserve(nodes.size());
        for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
            index.emplace(nodes[static_cast<std::size_t>(i)].id, i);
        return index;
    }

    void canonicalize_edges() {
        for (auto& e : edges)
            if (e.first > e.second) std::swap(e.first, e.second);
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    }

    void validate() const {
        std::unordered_set<long long> ids;
        ids.reserve(nodes.size());
        for (const auto& n : nodes)
            if (!ids.insert(n.id).second)
                throw std::invalid_argument("NotationGraph: duplicate node id " +
                                            std::to_string(n.id));
        for (const auto& e : edges) {
            if (e.first == e.second)
                throw std::invalid_argument("NotationGraph: self-loop on node " +
                                            std::to_string(e.first));
            if (!ids.count(e.first) || !ids.count(e.second))
                throw std::invalid_argument("NotationGraph: edge (" +
                                            std::to_string(e.first) + ", " +
                                            std::to_string(e.second) +
                                            ") references a missing node");
        }
    }
};

// Drop nodes whose class is outside `keep` (and edges touching them).
// Node ids are preserved.
inline NotationGraph restrict_classes(const NotationGraph& graph,
                                      const std::set<std::string>& keep,
                                      const ClassVocab& vocab) {
    std::unordered_set<int> keep_ids;
    for (const auto& name : keep) keep_ids.insert(vocab.id_of(name));

    NotationGraph out;
    out.document_id = graph.document_id;
    out.page_width = graph.page_width;
    out.page_height = graph.page_height;

    std::unordered_set<long long> kept_nodes;
    for (const auto& n : graph.nodes) {
        if (keep_ids.count(n.class_id)) {
            out.nodes.push_back(n);
            kept_nodes.insert(n.id);
        }
    }
    for (const auto& e : graph.edges)
        if (kept_nodes.count(e.first) && kept_nodes.count(e.second)) out.edges.push_back(e);
    return out;
}

}  // namespace omr
