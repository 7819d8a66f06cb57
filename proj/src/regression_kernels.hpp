#pragma once

// Per-sample forward/backward passes shared by inference, training and the gradient check.

#include <array>
#include <span>
#include <vector>

#include "healthwatch/detector.hpp"

namespace healthwatch::detail {

struct RegressionTrace {
    std::array<double, 18> a1{};
    std::array<double, 9> a2{};
    std::array<double, 8> a3{};
    std::array<std::array<double, 4>, 3> head_hidden{};
    std::array<double, 3> head_out{};  ///< raw baseline, lower, upper before amplification
    double sig = 0.5;                  ///< sigmoid(w*iqr + b)
    double irregularity = 1.0;
    double lower_amp = 0.0;
    double upper_amp = 0.0;
    double baseline = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

static_assert(kTrunkSizes[0] == 18 && kTrunkSizes[1] == 9 && kTrunkSizes[2] == 8 && kHeadSizes[0] == 4);

inline void regression_forward(const RegressionNet& net, std::span<const double> input, double iqr,
                               RegressionTrace& tr) {
    net.trunk[0].forward(input, tr.a1);
    nn::relu_inplace(tr.a1);
    net.trunk[1].forward(tr.a1, tr.a2);
    nn::relu_inplace(tr.a2);
    net.trunk[2].forward(tr.a2, tr.a3);
    nn::relu_inplace(tr.a3);
    for (std::size_t h = 0; h < 3; ++h) {
        net.heads[h][0].forward(tr.a3, tr.head_hidden[h]);
        nn::relu_inplace(tr.head_hidden[h]);
        std::array<double, 1> out{};
        net.heads[h][1].forward(tr.head_hidden[h], out);
        tr.head_out[h] = out[0];
    }
    tr.sig = nn::sigmoid(net.irregularity_weight * iqr + net.irregularity_bias);
    tr.irregularity = 2.0 * tr.sig;
    const double base = tr.head_out[kBaselineHead];
    tr.baseline = base;
    tr.lower_amp = tr.irregularity * (tr.head_out[kLowerHead] - base) + base;
    tr.upper_amp = tr.irregularity * (tr.head_out[kUpperHead] - base) + base;
    // Ordering: clamp boundaries to the baseline.
    tr.lower = tr.lower_amp <= base ? tr.lower_amp : base;
    tr.upper = tr.upper_amp >= base ? tr.upper_amp : base;
}

/// Accumulates into `grad` the parameter gradient for upstream dL/d(baseline, lower, upper).
inline void regression_backward(const RegressionNet& net, std::span<const double> input, double iqr,
                                const RegressionTrace& tr, double g_base, double g_lower, double g_upper,
                                RegressionNet& grad) {
    const double base = tr.baseline;
    double g_lower_amp = 0.0;
    double g_upper_amp = 0.0;
    if (tr.lower_amp <= base) g_lower_amp = g_lower; else g_base += g_lower;
    if (tr.upper_amp >= base) g_upper_amp = g_upper; else g_base += g_upper;

    const double s = tr.irregularity;
    std::array<double, 3> g_out{};
    g_out[kLowerHead] = g_lower_amp * s;
    g_out[kUpperHead] = g_upper_amp * s;
    g_out[kBaselineHead] = g_base + (g_lower_amp + g_upper_amp) * (1.0 - s);
    const double g_s =
        g_lower_amp * (tr.head_out[kLowerHead] - base) + g_upper_amp * (tr.head_out[kUpperHead] - base);
    const double g_z = g_s * 2.0 * tr.sig * (1.0 - tr.sig);
    grad.irregularity_weight += g_z * iqr;
    grad.irregularity_bias += g_z;

    std::array<double, 8> g_a3{};
    for (std::size_t h = 0; h < 3; ++h) {
        if (g_out[h] == 0.0) continue;
        std::array<double, 1> go{g_out[h]};
        std::array<double, 4> g_hidden{};
        net.heads[h][1].backward(tr.head_hidden[h], go, grad.heads[h][1], g_hidden);
        nn::relu_backward(tr.head_hidden[h], g_hidden);
        std::array<double, 8> g_in{};
        net.heads[h][0].backward(tr.a3, g_hidden, grad.heads[h][0], g_in);
        for (std::size_t i = 0; i < 8; ++i) g_a3[i] += g_in[i];
    }
    nn::relu_backward(tr.a3, g_a3);
    std::array<double, 9> g_a2{};
    net.trunk[2].backward(tr.a2, g_a3, grad.trunk[2], g_a2);
    nn::relu_backward(tr.a2, g_a2);
    std::array<double, 18> g_a1{};
    net.trunk[1].backward(tr.a1, g_a2, grad.trunk[1], g_a1);
    nn::relu_backward(tr.a1, g_a1);
    net.trunk[0].backward(input, g_a1, grad.trunk[0], {});
}

struct ClassifierTrace {
    std::array<double, 8> h1{};
    std::array<double, 4> h2{};
    double logit = 0.0;
};

inline void classifier_forward(const ClassifierNet& net, std::span<const double, 3> x, ClassifierTrace& tr) {
    net.layers[0].forward(x, tr.h1);
    nn::relu_inplace(tr.h1);
    net.layers[1].forward(tr.h1, tr.h2);
    nn::relu_inplace(tr.h2);
    std::array<double, 1> z{};
    net.layers[2].forward(tr.h2, z);
    tr.logit = z[0];
}

inline void classifier_backward(const ClassifierNet& net, std::span<const double, 3> x, const ClassifierTrace& tr,
                                double g_logit, ClassifierNet& grad) {
    std::array<double, 1> gz{g_logit};
    std::array<double, 4> g_h2{};
    net.layers[2].backward(tr.h2, gz, grad.layers[2], g_h2);
    nn::relu_backward(tr.h2, g_h2);
    std::array<double, 8> g_h1{};
    net.layers[1].backward(tr.h1, g_h2, grad.layers[1], g_h1);
    nn::relu_backward(tr.h1, g_h1);
    net.layers[0].backward(x, g_h1, grad.layers[0], {});
}

} // namespace healthwatch::detail
