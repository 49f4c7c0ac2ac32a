#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cigan/core/errors.hpp"

namespace cigan {

namespace detail {

// Midranks (1-based); tied values share the average of their rank range.
inline std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
        i = j + 1;
    }
    return ranks;
}

inline void split_by_label(std::span<const double> scores, std::span<const int> labels,
                           std::vector<double>& pos, std::vector<double>& neg) {
    if (scores.size() != labels.size())
        throw InvalidInputError("scores and labels must have equal length");
    if (scores.empty()) throw InvalidInputError("empty score list");
    pos.clear();
    neg.clear();
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw InvalidInputError("scores must be finite");
        if (labels[i] == 1) pos.push_back(scores[i]);
        else if (labels[i] == 0) neg.push_back(scores[i]);
        else throw InvalidInputError("labels must be 0 or 1");
    }
    if (pos.empty() || neg.empty())
        throw InvalidInputError("AUC requires at least one positive and one negative label");
}

} // namespace detail

// Mann-Whitney AUC via midranks: the fraction of (positive, negative) pairs
// where the positive scores higher, ties counted 0.5.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    std::vector<double> pos, neg;
    detail::split_by_label(scores, labels, pos, neg);
    const std::size_t m = pos.size(), n = neg.size();
    std::vector<double> combined;
    combined.reserve(m + n);
    combined.insert(combined.end(), pos.begin(), pos.end());
    combined.insert(combined.end(), neg.begin(), neg.end());
    const std::vector<double> ranks = detail::midranks(combined);
    double pos_rank_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) pos_rank_sum += ranks[i];
    return (pos_rank_sum - 0.5 * static_cast<double>(m) * static_cast<double>(m + 1)) /
           (static_cast<double>(m) * static_cast<double>(n));
}

} // namespace cigan
