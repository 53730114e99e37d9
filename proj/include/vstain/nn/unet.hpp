#pragma once

#include "vstain/nn/ops.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace vstain::nn {

struct UNetConfig {
    int in_channels = 6;  // x_t and cond_he stacked
    int out_channels = 3;
    int width = 16;       // channels at full resolution; doubled per level
    int temb_dim = 32;

    friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

/// Three-level encoder-decoder with skip connections and a sinusoidal
/// timestep embedding injected after the first convolution of every level.
///
///   enc1 (W, HxW) -> pool -> enc2 (2W) -> pool -> mid (4W)
///   up + enc2 skip -> dec2 (2W) -> up + enc1 skip -> dec1 (W) -> 1x1 head
///
/// Spatial size must be divisible by 4.
class UNet {
public:
    // Intermediates kept for the backward pass.
    struct Cache {
        std::vector<int> t;
        std::vector<float> temb_in, temb_pre, temb_act;
        std::array<std::vector<float>, 5> level_emb;
        Tensor x;
        Tensor e1a, e1b, s1, p1;
        Tensor e2a, e2b, s2, p2;
        Tensor e3a, e3b, s3;
        Tensor c2, d2a, d2b, q2;
        Tensor c1, d1a, d1b, q1;
    };

    UNet() = default;
    UNet(const UNetConfig& cfg, std::uint64_t seed);

    const UNetConfig& config() const noexcept { return cfg_; }

    Tensor forward(const Tensor& x, const std::vector<int>& t) const;
    Tensor forward(const Tensor& x, const std::vector<int>& t, Cache& cache) const;
    void backward(const Cache& cache, const Tensor& grad_out);

    std::vector<Param*> params();
    std::vector<const Param*> params() const;
    std::size_t parameter_count() const;
    void zero_grad();

private:
    struct Block {
        Conv2d a, b;
        Linear emb;
    };

    UNetConfig cfg_;
    Linear temb_;
    Block enc1_, enc2_, mid_, dec2_, dec1_;
    Conv2d head_;

    Tensor run(const Tensor& x, const std::vector<int>& t, Cache& c) const;
};

} // namespace vstain::nn
