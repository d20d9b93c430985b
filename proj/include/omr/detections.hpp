#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "omr/geometry.hpp"
#include "omr/notation.hpp"

namespace omr {

constexpr double kProbSumTolerance = 1e-6;

struct DetectedNode {
    BBox bbox;
    std::vector<double> probs;  // class-probability vector, length C

    int argmax_class() const {
        if (probs.empty()) throw std::logic_error("DetectedNode: empty probability vector");
        return static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                                probs.begin());
    }

    double max_prob() const {
        if (probs.empty()) throw std::logic_error("DetectedNode: empty probability vector");
        return *std::max_element(probs.begin(), probs.end());
    }
};

struct DetectionSet {
    std::string document_id;
    double page_width = 0.0;
    double page_height = 0.0;
    std::vector<DetectedNode> nodes;
};

namespace detail {

inline void validate_probs(const std::vector<double>& probs, int line) {
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0 + 1e-12)
            throw std::invalid_argument("detections line " + std::to_string(line) +
                                        ": probability outside [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbSumTolerance)
        throw std::invalid_argument("detections line " + std::to_string(line) +
                                    ": probabilities sum to " + std::to_string(sum));
}

inline BBox parse_bbox_array(const nlohmann::json& arr, int line) {
    if (!arr.is_array() || arr.size() != 4)
        throw std::invalid_argument("detections line " + std::to_string(line) +
                                    ": bbox must be [top,left,bottom,right]");
    BBox b{arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(),
           arr[3].get<double>()};
    if (!b.valid())
        throw std::invalid_argument("detections line " + std::to_string(line) +
                                    ": invalid bbox (need finite, top<bottom, left<right)");
    return b;
}

}  // namespace detail

// JSON Lines: per document a header {"document_id","width","height"}, then one
// object per node, either {"bbox":[...],"probs":[...]} or the hard form
// {"bbox":[...],"class_id":k,"confidence":q} which expands to q on class k and
// (1-q)/(C-1) elsewhere.
inline std::vector<DetectionSet> read_detections(std::string_view jsonl_text,
                                                 const ClassVocab& vocab) {
    std::vector<DetectionSet> sets;
    std::istringstream in{std::string(jsonl_text)};
    std::string line;
    int line_no = 0;
    const int C = vocab.size();
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::invalid_argument("detections line " + std::to_string(line_no) + ": " +
                                        e.what());
        }
        if (obj.contains("document_id")) {
            DetectionSet set;
            set.document_id = obj.at("document_id").get<std::string>();
            set.page_width = obj.at("width").get<double>();
            set.page_height = obj.at("height").get<double>();
            if (!(set.page_width > 0.0) || !(set.page_height > 0.0))
                throw std::invalid_argument("detections line " + std::to_string(line_no) +
                                            ": page size must be positive");
            sets.push_back(std::move(set));
            continue;
        }
        if (sets.empty())
            throw std::invalid_argument("detections line " + std::to_string(line_no) +
                                        ": node before any document header");
        DetectedNode node;
        node.bbox = detail::parse_bbox_array(obj.at("bbox"), line_no);
        if (obj.contains("probs")) {
            node.probs = obj.at("probs").get<std::vector<double>>();
            if (static_cast<int>(node.probs.size()) != C)
                throw std::invalid_argument(
                    "detections line " + std::to_string(line_no) + ": expected " +
                    std::to_string(C) + " probabilities, got " +
                    std::to_string(node.probs.size()));
        } else if (obj.contains("class_id")) {
            const int k = obj.at("class_id").get<int>();
            const double q = obj.at("confidence").get<double>();
            if (k < 0 || k >= C)
                throw std::invalid_argument("detections line " + std::to_string(line_no) +
                                            ": class_id " + std::to_string(k) +
                                            " out of range");
            if (!std::isfinite(q) || q < 0.0 || q > 1.0)
                throw std::invalid_argument("detections line " + std::to_string(line_no) +
                                            ": confidence outside [0,1]");
            node.probs.assign(static_cast<std::size_t>(C),
                              C > 1 ? (1.0 - q) / (C - 1) : 0.0);
            node.probs[static_cast<std::size_t>(k)] = q;
        } else {
            throw std::invalid_argument("detections line " + std::to_string(line_no) +
                                        ": need either probs or class_id+confidence");
        }
        detail::validate_probs(node.probs, line_no);
        sets.back().nodes.push_back(std::move(node));
    }
    return sets;
}

inline std::string write_detections(std::span<const DetectionSet> sets) {
    std::string out;
    for (const auto& set : sets) {
        nlohmann::json header{{"document_id", set.document_id},
                              {"width", set.page_width},
                              {"height", set.page_height}};
        out += header.dump();
        out += '\n';
        for (const auto& node : set.nodes) {
            nlohmann::json obj{
                {"bbox",
                 {node.bbox.top, node.bbox.left, node.bbox.bottom, node.bbox.right}},
                {"probs", node.probs}};
            out += obj.dump();
            out += '\n';
        }
    }
    return out;
}

// Ground truth recast as detector output: exact boxes, one-hot classes.
inline DetectionSet perfect_detections(const NotationGraph& graph, int num_classes) {
    DetectionSet set;
    set.document_id = graph.document_id;
    set.page_width = graph.page_width;
    set.page_height = graph.page_height;
    set.nodes.reserve(graph.nodes.size());
    for (const auto& n : graph.nodes) {
        if (n.class_id < 0 || n.class_id >= num_classes)
            throw std::invalid_argument("perfect_detections: class id out of range");
        DetectedNode d;
        d.bbox = n.bbox;
        d.probs.assign(static_cast<std::size_t>(num_classes), 0.0);
        d.probs[static_cast<std::size_t>(n.class_id)] = 1.0;
        set.nodes.push_back(std::move(d));
    }
    return set;
}

}  // namespace omr
