#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "omr/rng.hpp"

namespace omr {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

// Ordered class-name vocabulary. Position in `names` is the class id.
class ClassVocab {
  public:
    ClassVocab() = default;

    static ClassVocab from_names(std::vector<std::string> names) {
        ClassVocab v;
        v.names_ = std::move(names);
        for (int i = 0; i < static_cast<int>(v.names_.size()); ++i) {
            if (v.names_[i].empty())
                throw std::invalid_argument("ClassVocab: empty class name at position " +
                                            std::to_string(i));
            if (!v.index_.emplace(v.names_[i], i).second)
                throw std::invalid_argument("ClassVocab: duplicate class name '" +
                                            v.names_[i] + "'");
        }
        return v;
    }

    // One name per line; blank lines and '#' comment lines ignored.
    static ClassVocab parse(std::string_view text) {
        std::vector<std::string> names;
        std::istringstream in{std::string(text)};
        std::string line;
        while (std::getline(in, line)) {
            std::string name = trim(line);
            if (name.empty() || name[0] == '#') continue;
            names.push_back(std::move(name));
        }
        return from_names(std::move(names));
    }

    int size() const { return static_cast<int>(names_.size()); }

    const std::vector<std::string>& names() const { return names_; }

    const std::string& name(int id) const {
        if (id < 0 || id >= size())
            throw std::out_of_range("ClassVocab: class id " + std::to_string(id) +
                                    " out of range");
        return names_[static_cast<std::size_t>(id)];
    }

    std::optional<int> find(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    int id_of(std::string_view name) const {
        auto id = find(name);
        if (!id)
            throw std::invalid_argument("ClassVocab: unknown class name '" +
                                        std::string(name) + "'");
        return *id;
    }

    bool contains(std::string_view name) const { return find(name).has_value(); }

    // Order-sensitive content hash, recorded in checkpoints to catch
    // vocabulary/model mismatches.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        for (const auto& n : names_) {
            for (unsigned char c : n) {
                h ^= c;
                h *= 1099511628211ULL;
            }
            h ^= '\n';
            h *= 1099511628211ULL;
        }
        return h;
    }

    std::string serialize() const {
        std::string out;
        for (const auto& n : names_) {
            out += n;
            out += '\n';
        }
        return out;
    }

  private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
};

// Directed (parent, child) class pairs. Edge direction between two symbols is
// a function of their classes, so prediction works on undirected edges and
// direction is recovered at presentation time.
class GrammarRules {
  public:
    GrammarRules() = default;

    void add(int parent, int child) {
        if (pairs_.count({child, parent}))
            throw std::invalid_argument(
                "GrammarRules: pair present in both orientations (ids " +
                std::to_string(parent) + ", " + std::to_string(child) + ")");
        pairs_.insert({parent, child});
    }

    bool has(int parent, int child) const { return pairs_.count({parent, child}) > 0; }

    std::size_t size() const { return pairs_.size(); }

    // "parent<TAB>child" per line; blank lines and '#' comments ignored.
    static GrammarRules parse(std::string_view text, const ClassVocab& vocab) {
        GrammarRules rules;
        std::istringstream in{std::string(text)};
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string entry = trim(line);
            if (entry.empty() || entry[0] == '#') continue;
            const auto tab = entry.find('\t');
            if (tab == std::string::npos)
                throw std::invalid_argument("GrammarRules: line " + std::to_string(line_no) +
                                            ": expected 'parent<TAB>child'");
            const std::string parent = trim(entry.substr(0, tab));
            const std::string child = trim(entry.substr(tab + 1));
            rules.add(vocab.id_of(parent), vocab.id_of(child));
        }
        return rules;
    }

  private:
    std::set<std::pair<int, int>> pairs_;
};

struct EdgeOrientation {
    bool directed = false;
    // When undirected, parent/child hold the canonical (lower class id first)
    // order so callers still get a stable presentation.
    std::string parent;
    std::string child;
};

inline EdgeOrientation orient_edge(const std::string& class_a, const std::string& class_b,
                                   const GrammarRules& rules, const ClassVocab& vocab) {
    const int a = vocab.id_of(class_a);
    const int b = vocab.id_of(class_b);
    if (rules.has(a, b)) return {true, class_a, class_b};
    if (rules.has(b, a)) return {true, class_b, class_a};
    if (a <= b) return {false, class_a, class_b};
    return {false, class_b, class_a};
}

// Approximation of the attested "essential" subset: drop classes that never
// occur, then drop the rarest until `target` remain (ties alphabetical).
inline std::vector<std::string> derive_essential_classes(const ClassVocab& vocab,
                                                         const std::vector<long long>& counts,
                                                         int target = 73) {
    if (static_cast<int>(counts.size()) != vocab.size())
        throw std::invalid_argument("derive_essential_classes: counts size mismatch");
    std::vector<int> attested;
    for (int i = 0; i < vocab.size(); ++i)
        if (counts[static_cast<std::size_t>(i)] > 0) attested.push_back(i);
    if (static_cast<int>(attested.size()) > target) {
        std::sort(attested.begin(), attested.end(), [&](int x, int y) {
            const auto cx = counts[static_cast<std::size_t>(x)];
            const auto cy = counts[static_cast<std::size_t>(y)];
            if (cx != cy) return cx > cy;            // keep more frequent
            return vocab.name(x) < vocab.name(y);    // ties: drop later alphabet first
        });
        attested.resize(static_cast<std::size_t>(target));
    }
    std::sort(attested.begin(), attested.end());
    std::vector<std::string> out;
    out.reserve(attested.size());
    for (int id : attested) out.push_back(vocab.name(id));
    return out;
}

}  // namespace omr
