#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ddval/types.hpp"

namespace ddval {

struct ModelShape {
    std::size_t d_in = 0;
    std::size_t d_h = 32;
    std::size_t n_labels = 1;

    std::size_t n_params() const { return d_h * d_in + d_h + n_labels * d_h + n_labels; }
    bool operator==(const ModelShape&) const = default;
};

// One-hidden-layer network: tanh hidden layer, per-label sigmoid outputs,
// trained with per-label binary cross-entropy. Parameters live in one flat
// vector (W1, b1, W2, b2) so FedAvg deltas are plain vector arithmetic.
class LinearModel {
public:
    LinearModel(ModelShape shape, std::vector<double> params);

    // Gaussian init scaled by 1/sqrt(fan_in); fully determined by the seed.
    static LinearModel init(ModelShape shape, std::uint64_t seed);

    const ModelShape& shape() const { return shape_; }
    const std::vector<double>& params() const { return params_; }
    std::vector<double>& params() { return params_; }

    void add_delta(std::span<const double> delta, double factor = 1.0);

    // Post-tanh hidden activations (the extracted deep feature vector).
    void hidden(std::span<const double> x, std::span<double> out) const;
    // Pre-sigmoid per-label scores.
    void logits(std::span<const double> x, std::span<double> out) const;
    std::vector<double> probabilities(std::span<const double> x) const;

    // Mean binary cross-entropy over the batch and label dimensions,
    // computed from logits in the overflow-safe form.
    double loss(std::span<const DataPoint> batch) const;
    // Returns the loss; grad (size n_params) receives d loss / d params.
    double loss_and_gradient(std::span<const DataPoint> batch, std::span<double> grad) const;

private:
    // Flat layout offsets.
    std::size_t w1() const { return 0; }
    std::size_t b1() const { return shape_.d_h * shape_.d_in; }
    std::size_t w2() const { return b1() + shape_.d_h; }
    std::size_t b2() const { return w2() + shape_.n_labels * shape_.d_h; }

    ModelShape shape_;
    std::vector<double> params_;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace ddval
