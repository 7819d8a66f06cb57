#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace healthwatch::nn {

/// Fully connected layer, y = W x + b with W stored row-major (outputs x inputs).
struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out) : inputs(in), outputs(out), weight(in * out, 0.0), bias(out, 0.0) {}

    void forward(std::span<const double> x, std::span<double> y) const;

    /// Accumulates parameter gradients into `grad` given dL/dy (pre-activation) and the layer input.
    /// Writes dL/dx into `grad_input` when it is non-empty.
    void backward(std::span<const double> x, std::span<const double> grad_output, DenseLayer& grad,
                  std::span<double> grad_input) const;

    void zero();
    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

enum class Init { he_uniform, glorot_uniform };

void initialize(DenseLayer& layer, Init scheme, std::mt19937_64& rng);

inline void relu_inplace(std::span<double> v) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
}

/// dL/dpre = dL/dpost where the post-activation is positive.
inline void relu_backward(std::span<const double> post, std::span<double> grad) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (post[i] <= 0.0) grad[i] = 0.0;
}

double sigmoid(double z);

/// Adam over a fixed list of parameter blocks.
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

    void step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads);

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace healthwatch::nn
