#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace ddval {

// One datum: a real-valued vector (raw features or extracted
// last-layer activations) with a multi-dimensional binary label and owner
// lineage. Used both for raw training data and for the deep features the
// valuation runs on.
struct DataPoint {
    std::uint64_t point_id = 0;
    std::uint64_t subject_id = 0;
    std::uint32_t client_id = 0;
    std::vector<double> x;
    std::vector<std::uint8_t> labels;  // entries in {0, 1}
    std::uint8_t flipped_labels = 0;   // bookkeeping for the label-flip experiments
};

using Dataset = std::vector<DataPoint>;

// Throws std::invalid_argument on dimension mismatch, labels outside {0,1},
// non-finite feature entries, or duplicate point ids.
void validate_points(std::span<const DataPoint> points, std::size_t dim, std::size_t n_labels);

inline std::size_t feature_dim(std::span<const DataPoint> points) {
    return points.empty() ? 0 : points.front().x.size();
}
inline std::size_t label_dim(std::span<const DataPoint> points) {
    return points.empty() ? 0 : points.front().labels.size();
}

}  // namespace ddval
