#include "ddval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ddval/kernels.hpp"

namespace ddval {

double auroc_binary(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::invalid_argument("auroc: scores/labels size mismatch");
    }
    const std::size_t n = scores.size();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return scores[a] < scores[b];
    });

    // Sum of average ranks (1-based) over positives, walking tie groups.
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw std::invalid_argument("auroc: needs both classes");
    }
    return (rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double macro_auroc(const std::vector<std::vector<double>>& scores,
                   const std::vector<std::vector<std::uint8_t>>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::invalid_argument("macro_auroc: scores/labels size mismatch");
    }
    const std::size_t n_labels = labels.front().size();
    double total = 0.0;
    std::size_t scored = 0;
    std::vector<double> col_scores(scores.size());
    std::vector<std::uint8_t> col_labels(scores.size());
    for (std::size_t l = 0; l < n_labels; ++l) {
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            col_scores[i] = scores[i][l];
            col_labels[i] = labels[i][l];
            n_pos += labels[i][l] ? 1 : 0;
        }
        if (n_pos == 0 || n_pos == scores.size()) continue;  // single-class dimension
        total += auroc_binary(col_scores, col_labels);
        ++scored;
    }
    if (scored == 0) {
        throw std::invalid_argument("macro_auroc: no label dimension with both classes");
    }
    return total / static_cast<double>(scored);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("cosine_similarity: length mismatch");
    }
    const double na = kernels::dot(a.data(), a.data(), a.size());
    const double nb = kernels::dot(b.data(), b.data(), b.size());
    if (na == 0.0 || nb == 0.0) {
        throw std::invalid_argument("cosine_similarity: zero-norm vector");
    }
    return kernels::dot(a.data(), b.data(), a.size()) / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace ddval
