#pragma once

#include "vstain/nn/tensor.hpp"
#include "vstain/rng.hpp"

#include <vector>

namespace vstain::nn {

// Same-padded convolution with kernel size 1 or 3, stride 1.
struct Conv2d {
    int in_ch = 0, out_ch = 0, ksize = 3;
    Param weight; // [out_ch, in_ch * ksize * ksize]
    Param bias;   // [out_ch]

    Conv2d() = default;
    Conv2d(const std::string& name, int in, int out, int k);

    void init(Rng& rng, float gain = 1.0f);
    Tensor forward(const Tensor& x) const;
    // Accumulates parameter gradients; returns dL/dx when `need_input_grad`.
    Tensor backward(const Tensor& x, const Tensor& grad_out, bool need_input_grad = true);
};

struct Linear {
    int in_features = 0, out_features = 0;
    Param weight; // [out, in]
    Param bias;   // [out]

    Linear() = default;
    Linear(const std::string& name, int in, int out);

    void init(Rng& rng, float gain = 1.0f);
    // x: [batch, in] stored row-major; returns [batch, out].
    std::vector<float> forward(const std::vector<float>& x, int batch) const;
    std::vector<float> backward(const std::vector<float>& x, const std::vector<float>& grad_out, int batch);
};

float silu(float x) noexcept;
Tensor silu(const Tensor& x);
std::vector<float> silu(const std::vector<float>& x);
Tensor silu_backward(const Tensor& x, const Tensor& grad_out);
std::vector<float> silu_backward(const std::vector<float>& x, const std::vector<float>& grad_out);

Tensor avg_pool2(const Tensor& x);
Tensor avg_pool2_backward(const Tensor& grad_out);
Tensor upsample2(const Tensor& x);
Tensor upsample2_backward(const Tensor& grad_out);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& g, int a_channels, Tensor& ga, Tensor& gb);

// x[n, c, :, :] += v[n * C + c]
void add_channel_bias(Tensor& x, const std::vector<float>& v);
std::vector<float> channel_sums(const Tensor& g);

Tensor add(const Tensor& a, const Tensor& b);

// [n, c, h, w] -> [n, c]
std::vector<float> global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const std::vector<float>& grad_out, int n, int c, int h, int w);

// Sinusoidal embedding of integer timesteps, one row of `dim` per entry.
std::vector<float> timestep_embedding(const std::vector<int>& t, int dim);

// Mean squared error over all elements, and its gradient scaled by `weight`.
double mse(const Tensor& pred, const Tensor& target);
Tensor mse_grad(const Tensor& pred, const Tensor& target, double weight);

// Mean softmax cross-entropy over a batch of logits [batch, classes].
double softmax_cross_entropy(const std::vector<float>& logits, const std::vector<int>& labels, int classes,
                             std::vector<float>* grad);

} // namespace vstain::nn
