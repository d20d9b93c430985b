#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "omr/rng.hpp"

namespace omr {

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

// Deterministic partition: sort ids, seeded Fisher-Yates shuffle, then cut by
// largest-remainder rounded ratios.
inline DatasetSplit split_dataset(std::vector<std::string> document_ids,
                                  const std::array<double, 3>& ratios, std::uint64_t seed) {
    if (document_ids.empty())
        throw std::invalid_argument("split_dataset: no document ids");
    {
        std::unordered_set<std::string> unique(document_ids.begin(), document_ids.end());
        if (unique.size() != document_ids.size())
            throw std::invalid_argument("split_dataset: duplicate document ids");
    }
    double ratio_sum = 0.0;
    for (double r : ratios) {
        if (r < 0.0) throw std::invalid_argument("split_dataset: negative ratio");
        ratio_sum += r;
    }
    if (std::abs(ratio_sum - 1.0) > 1e-9)
        throw std::invalid_argument("split_dataset: ratios must sum to 1");

    std::sort(document_ids.begin(), document_ids.end());
    Rng rng(seed);
    rng.shuffle(document_ids);

    const std::size_t n = document_ids.size();
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> fractions{};
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        const double quota = static_cast<double>(n) * ratios[static_cast<std::size_t>(k)];
        sizes[static_cast<std::size_t>(k)] = static_cast<std::size_t>(std::floor(quota));
        fractions[static_cast<std::size_t>(k)] =
            quota - std::floor(quota);
        assigned += sizes[static_cast<std::size_t>(k)];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return fractions[static_cast<std::size_t>(a)] > fractions[static_cast<std::size_t>(b)];
    });
    for (std::size_t leftover = n - assigned, k = 0; k < leftover; ++k)
        ++sizes[static_cast<std::size_t>(order[k % 3])];

    DatasetSplit split;
    auto cursor = document_ids.begin();
    split.train.assign(cursor, cursor + static_cast<std::ptrdiff_t>(sizes[0]));
    cursor += static_cast<std::ptrdiff_t>(sizes[0]);
    split.validation.assign(cursor, cursor + static_cast<std::ptrdiff_t>(sizes[1]));
    cursor += static_cast<std::ptrdiff_t>(sizes[1]);
    split.test.assign(cursor, document_ids.end());
    return split;
}

}  // namespace omr
