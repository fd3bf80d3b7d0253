#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ddval {

// AUROC of one score column via the rank statistic, with average ranks for
// tied scores. Requires at least one positive and one negative.
double auroc_binary(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Macro-averaged AUROC over label dimensions. scores[i] is the score vector
// of point i (length n_labels). Dimensions whose test labels are single-class
// are skipped; throws std::invalid_argument if no dimension is scorable.
double macro_auroc(const std::vector<std::vector<double>>& scores,
                   const std::vector<std::vector<std::uint8_t>>& labels);

// a.b / (|a||b|). Throws std::invalid_argument on length mismatch or a
// zero-norm input.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace ddval
