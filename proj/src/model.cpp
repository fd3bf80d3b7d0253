#include "ddval/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "ddval/kernels.hpp"
#include "ddval/rng.hpp"

namespace ddval {

LinearModel::LinearModel(ModelShape shape, std::vector<double> params)
    : shape_(shape), params_(std::move(params)) {
    if (params_.size() != shape_.n_params()) {
        throw std::invalid_argument("LinearModel: parameter count mismatch");
    }
}

LinearModel LinearModel::init(ModelShape shape, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x6d6f64656cULL));
    std::vector<double> p(shape.n_params(), 0.0);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(shape.d_in));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(shape.d_h));
    std::size_t idx = 0;
    for (std::size_t i = 0; i < shape.d_h * shape.d_in; ++i) p[idx++] = s1 * rng.gaussian();
    idx += shape.d_h;  // b1 = 0
    for (std::size_t i = 0; i < shape.n_labels * shape.d_h; ++i) p[idx++] = s2 * rng.gaussian();
    return LinearModel(shape, std::move(p));
}

void LinearModel::add_delta(std::span<const double> delta, double factor) {
    if (delta.size() != params_.size()) {
        throw std::invalid_argument("LinearModel::add_delta: size mismatch");
    }
    kernels::axpy(factor, delta.data(), params_.data(), params_.size());
}

void LinearModel::hidden(std::span<const double> x, std::span<double> out) const {
    const double* W1 = params_.data() + w1();
    const double* B1 = params_.data() + b1();
    for (std::size_t j = 0; j < shape_.d_h; ++j) {
        out[j] = std::tanh(kernels::dot(W1 + j * shape_.d_in, x.data(), shape_.d_in) + B1[j]);
    }
}

void LinearModel::logits(std::span<const double> x, std::span<double> out) const {
    std::vector<double> h(shape_.d_h);
    hidden(x, h);
    const double* W2 = params_.data() + w2();
    const double* B2 = params_.data() + b2();
    for (std::size_t l = 0; l < shape_.n_labels; ++l) {
        out[l] = kernels::dot(W2 + l * shape_.d_h, h.data(), shape_.d_h) + B2[l];
    }
}

std::vector<double> LinearModel::probabilities(std::span<const double> x) const {
    std::vector<double> z(shape_.n_labels);
    logits(x, z);
    for (double& v : z) v = sigmoid(v);
    return z;
}

namespace {

// max(z,0) - z*y + log(1 + exp(-|z|))
inline double bce_from_logit(double z, double y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

double LinearModel::loss(std::span<const DataPoint> batch) const {
    if (batch.empty()) throw std::invalid_argument("LinearModel::loss: empty batch");
    std::vector<double> z(shape_.n_labels);
    double total = 0.0;
    for (const DataPoint& p : batch) {
        logits(p.x, z);
        for (std::size_t l = 0; l < shape_.n_labels; ++l) {
            total += bce_from_logit(z[l], static_cast<double>(p.labels[l]));
        }
    }
    return total / (static_cast<double>(batch.size()) * static_cast<double>(shape_.n_labels));
}

double LinearModel::loss_and_gradient(std::span<const DataPoint> batch,
                                      std::span<double> grad) const {
    if (batch.empty()) throw std::invalid_argument("LinearModel::loss_and_gradient: empty batch");
    if (grad.size() != params_.size()) {
        throw std::invalid_argument("LinearModel::loss_and_gradient: grad size mismatch");
    }
    std::fill(grad.begin(), grad.end(), 0.0);

    const double* W1 = params_.data() + w1();
    const double* B1 = params_.data() + b1();
    const double* W2 = params_.data() + w2();
    const double* B2 = params_.data() + b2();
    double* gW1 = grad.data() + w1();
    double* gB1 = grad.data() + b1();
    double* gW2 = grad.data() + w2();
    double* gB2 = grad.data() + b2();

    const double inv = 1.0 / (static_cast<double>(batch.size()) *
                              static_cast<double>(shape_.n_labels));
    std::vector<double> h(shape_.d_h), g2(shape_.n_labels), g1(shape_.d_h);
    double total = 0.0;

    for (const DataPoint& p : batch) {
        for (std::size_t j = 0; j < shape_.d_h; ++j) {
            h[j] = std::tanh(kernels::dot(W1 + j * shape_.d_in, p.x.data(), shape_.d_in) + B1[j]);
        }
        for (std::size_t l = 0; l < shape_.n_labels; ++l) {
            const double z = kernels::dot(W2 + l * shape_.d_h, h.data(), shape_.d_h) + B2[l];
            const double y = static_cast<double>(p.labels[l]);
            total += bce_from_logit(z, y);
            g2[l] = (sigmoid(z) - y) * inv;
        }
        for (std::size_t l = 0; l < shape_.n_labels; ++l) {
            kernels::axpy(g2[l], h.data(), gW2 + l * shape_.d_h, shape_.d_h);
            gB2[l] += g2[l];
        }
        for (std::size_t j = 0; j < shape_.d_h; ++j) {
            double dh = 0.0;
            for (std::size_t l = 0; l < shape_.n_labels; ++l) {
                dh += W2[l * shape_.d_h + j] * g2[l];
            }
            g1[j] = dh * (1.0 - h[j] * h[j]);
        }
        for (std::size_t j = 0; j < shape_.d_h; ++j) {
            kernels::axpy(g1[j], p.x.data(), gW1 + j * shape_.d_in, shape_.d_in);
            gB1[j] += g1[j];
        }
    }
    return total * inv;
}

}  // namespace ddval
