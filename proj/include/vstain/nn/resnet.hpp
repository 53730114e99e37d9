#pragma once

#include "vstain/nn/ops.hpp"

#include <cstdint>
#include <vector>

namespace vstain::nn {

struct ResNetConfig {
    int in_channels = 3;
    int classes = 2;
    int width = 8;

    friend bool operator==(const ResNetConfig&, const ResNetConfig&) = default;
};

// stem -> residual block -> pool -> widen -> residual block -> global pool -> linear
class ResNetClassifier {
public:
    struct Cache {
        Tensor x;
        Tensor stem_pre, a0, r1a, r1b, sum1, a1, pooled;
        Tensor widen_pre, b0, r2a, r2b, sum2, b1;
        std::vector<float> features;
    };

    ResNetClassifier() = default;
    ResNetClassifier(const ResNetConfig& cfg, std::uint64_t seed);

    const ResNetConfig& config() const noexcept { return cfg_; }

    // Logits [n, classes].
    std::vector<float> forward(const Tensor& x) const;
    std::vector<float> forward(const Tensor& x, Cache& cache) const;
    void backward(const Cache& cache, const std::vector<float>& grad_logits);

    std::vector<int> predict(const Tensor& x) const;

    std::vector<Param*> params();
    std::vector<const Param*> params() const;
    void zero_grad();

private:
    ResNetConfig cfg_;
    Conv2d stem_, res1_a_, res1_b_, widen_, res2_a_, res2_b_;
    Linear fc_;

    std::vector<float> run(const Tensor& x, Cache& c) const;
};

} // namespace vstain::nn
