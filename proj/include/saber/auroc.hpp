#pragma once

#include "saber/error.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace saber {

/// Area under the ROC curve from rank statistics (Mann-Whitney U).
///
/// Tied scores share their mid-rank, which gives each positive/negative tie
/// half credit. Ranks are kept doubled so the whole computation stays in
/// integers until the final division; the result is bit-identical to the
/// pairwise count (2 * wins + ties) / (2 * n_pos * n_neg).
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw data_error("auroc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::uint64_t n_pos = 0;
    std::uint64_t rank2_sum = 0; // sum over positives of 2 * (1-based mid-rank)
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // positions i..j-1 (0-based) share mid-rank ((i+1) + j) / 2
        const std::uint64_t tied_rank2 = static_cast<std::uint64_t>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] != 0) {
                ++n_pos;
                rank2_sum += tied_rank2;
            }
        }
        i = j;
    }
    const std::uint64_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw data_error("AUROC undefined: need both classes");
    const std::uint64_t u2 = rank2_sum - n_pos * (n_pos + 1);
    return static_cast<double>(u2) / static_cast<double>(2 * n_pos * n_neg);
}

inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    return auroc(std::span<const double>(scores), std::span<const int>(labels));
}

} // namespace saber
