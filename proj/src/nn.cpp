#include "healthwatch/nn.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace healthwatch::nn {

void DenseLayer::forward(std::span<const double> x, std::span<double> y) const {
    assert(x.size() == inputs && y.size() == outputs);
    for (std::size_t o = 0; o < outputs; ++o) {
        const double* row = weight.data() + o * inputs;
        double acc = bias[o];
        for (std::size_t i = 0; i < inputs; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

void DenseLayer::backward(std::span<const double> x, std::span<const double> grad_output, DenseLayer& grad,
                          std::span<double> grad_input) const {
    if (!grad_input.empty()) std::ranges::fill(grad_input, 0.0);
    for (std::size_t o = 0; o < outputs; ++o) {
        const double g = grad_output[o];
        if (g == 0.0) continue;
        grad.bias[o] += g;
        double* grow = grad.weight.data() + o * inputs;
        for (std::size_t i = 0; i < inputs; ++i) grow[i] += g * x[i];
        if (!grad_input.empty()) {
            const double* row = weight.data() + o * inputs;
            for (std::size_t i = 0; i < inputs; ++i) grad_input[i] += g * row[i];
        }
    }
}

void DenseLayer::zero() {
    std::ranges::fill(weight, 0.0);
    std::ranges::fill(bias, 0.0);
}

void initialize(DenseLayer& layer, Init scheme, std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(layer.inputs);
    const double fan_out = static_cast<double>(layer.outputs);
    const double limit =
        scheme == Init::he_uniform ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer.weight) w = dist(rng);
    std::ranges::fill(layer.bias, 0.0);
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void Adam::step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads) {
    assert(params.size() == grads.size());
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b];
        auto g = grads[b];
        auto& m = m_[b];
        auto& v = v_[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

} // namespace healthwatch::nn
