#include "vstain/nn/ops.hpp"

#include "vstain/errors.hpp"
#include "vstain/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace vstain::nn {

Param::Param(std::string name_, std::vector<int> shape_) : name(std::move(name_)), shape(std::move(shape_)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    value.assign(n, 0.0f);
    grad.assign(n, 0.0f);
}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }

namespace {

// col: [in_ch * 9, h * w]
void im2col3(const float* x, int ch, int h, int w, float* col) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < ch; ++c) {
        const float* src = x + c * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                float* dst = col + ((c * 3 + ky) * 3 + kx) * hw;
                const int dy = ky - 1, dx = kx - 1;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    float* row = dst + static_cast<std::size_t>(y) * w;
                    if (sy < 0 || sy >= h) {
                        std::fill(row, row + w, 0.0f);
                        continue;
                    }
                    const float* srow = src + static_cast<std::size_t>(sy) * w;
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    for (int xx = 0; xx < x0; ++xx) row[xx] = 0.0f;
                    std::copy(srow + x0 + dx, srow + x1 + dx, row + x0);
                    for (int xx = x1; xx < w; ++xx) row[xx] = 0.0f;
                }
            }
        }
    }
}

void col2im3(const float* col, int ch, int h, int w, float* x) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    std::fill(x, x + ch * hw, 0.0f);
    for (int c = 0; c < ch; ++c) {
        float* dst = x + c * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const float* src = col + ((c * 3 + ky) * 3 + kx) * hw;
                const int dy = ky - 1, dx = kx - 1;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    const float* row = src + static_cast<std::size_t>(y) * w;
                    float* drow = dst + static_cast<std::size_t>(sy) * w;
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    for (int xx = x0; xx < x1; ++xx) drow[xx + dx] += row[xx];
                }
            }
        }
    }
}

void init_normal(Param& p, Rng& rng, double stddev) {
    for (float& v : p.value) v = static_cast<float>(rng.normal() * stddev);
}

} // namespace

Conv2d::Conv2d(const std::string& name, int in, int out, int k)
    : in_ch(in), out_ch(out), ksize(k), weight(name + ".weight", {out, in * k * k}), bias(name + ".bias", {out}) {
    require(k == 1 || k == 3, "Conv2d: kernel size must be 1 or 3");
}

void Conv2d::init(Rng& rng, float gain) {
    const double fan_in = static_cast<double>(in_ch) * ksize * ksize;
    init_normal(weight, rng, gain * std::sqrt(2.0 / fan_in));
    std::fill(bias.value.begin(), bias.value.end(), 0.0f);
}

Tensor Conv2d::forward(const Tensor& x) const {
    require(x.c == in_ch, "Conv2d: expected " + std::to_string(in_ch) + " input channels, got " + std::to_string(x.c));
    const auto& k = simd::active();
    Tensor out(x.n, out_ch, x.h, x.w);
    const int hw = x.h * x.w;
    const int kdim = in_ch * ksize * ksize;
    std::vector<float> col;
    if (ksize == 3) col.resize(static_cast<std::size_t>(kdim) * hw);
    for (int i = 0; i < x.n; ++i) {
        const float* src = x.sample(i);
        if (ksize == 3) {
            im2col3(src, in_ch, x.h, x.w, col.data());
            src = col.data();
        }
        float* dst = out.sample(i);
        for (int o = 0; o < out_ch; ++o) std::fill(dst + o * hw, dst + (o + 1) * hw, bias.value[o]);
        k.gemm_f32(false, false, out_ch, hw, kdim, 1.0f, weight.value.data(), kdim, src, hw, 1.0f, dst, hw);
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& grad_out, bool need_input_grad) {
    const auto& k = simd::active();
    const int hw = x.h * x.w;
    const int kdim = in_ch * ksize * ksize;
    Tensor gin;
    if (need_input_grad) gin = Tensor(x.n, x.c, x.h, x.w);
    std::vector<float> col, dcol;
    if (ksize == 3) {
        col.resize(static_cast<std::size_t>(kdim) * hw);
        if (need_input_grad) dcol.resize(col.size());
    }
    for (int i = 0; i < x.n; ++i) {
        const float* src = x.sample(i);
        if (ksize == 3) {
            im2col3(src, in_ch, x.h, x.w, col.data());
            src = col.data();
        }
        const float* g = grad_out.sample(i);
        k.gemm_f32(false, true, out_ch, kdim, hw, 1.0f, g, hw, src, hw, 1.0f, weight.grad.data(), kdim);
        for (int o = 0; o < out_ch; ++o) {
            double s = 0.0;
            for (int p = 0; p < hw; ++p) s += g[o * hw + p];
            bias.grad[o] += static_cast<float>(s);
        }
        if (need_input_grad) {
            if (ksize == 3) {
                k.gemm_f32(true, false, kdim, hw, out_ch, 1.0f, weight.value.data(), kdim, g, hw, 0.0f, dcol.data(), hw);
                col2im3(dcol.data(), in_ch, x.h, x.w, gin.sample(i));
            } else {
                k.gemm_f32(true, false, kdim, hw, out_ch, 1.0f, weight.value.data(), kdim, g, hw, 0.0f, gin.sample(i), hw);
            }
        }
    }
    return gin;
}

Linear::Linear(const std::string& name, int in, int out)
    : in_features(in), out_features(out), weight(name + ".weight", {out, in}), bias(name + ".bias", {out}) {}

void Linear::init(Rng& rng, float gain) {
    init_normal(weight, rng, gain * std::sqrt(1.0 / in_features));
    std::fill(bias.value.begin(), bias.value.end(), 0.0f);
}

std::vector<float> Linear::forward(const std::vector<float>& x, int batch) const {
    require(x.size() == static_cast<std::size_t>(batch) * in_features, "Linear: input size mismatch");
    std::vector<float> out(static_cast<std::size_t>(batch) * out_features);
    for (int b = 0; b < batch; ++b)
        std::copy(bias.value.begin(), bias.value.end(), out.begin() + b * out_features);
    simd::active().gemm_f32(false, true, batch, out_features, in_features, 1.0f, x.data(), in_features,
                            weight.value.data(), in_features, 1.0f, out.data(), out_features);
    return out;
}

std::vector<float> Linear::backward(const std::vector<float>& x, const std::vector<float>& grad_out, int batch) {
    const auto& k = simd::active();
    k.gemm_f32(true, false, out_features, in_features, batch, 1.0f, grad_out.data(), out_features, x.data(),
               in_features, 1.0f, weight.grad.data(), in_features);
    for (int b = 0; b < batch; ++b)
        for (int o = 0; o < out_features; ++o) bias.grad[o] += grad_out[b * out_features + o];
    std::vector<float> gin(static_cast<std::size_t>(batch) * in_features);
    k.gemm_f32(false, false, batch, in_features, out_features, 1.0f, grad_out.data(), out_features,
               weight.value.data(), in_features, 0.0f, gin.data(), in_features);
    return gin;
}

float silu(float x) noexcept { return x / (1.0f + std::exp(-x)); }

namespace {

inline float silu_grad(float x) noexcept {
    const float s = 1.0f / (1.0f + std::exp(-x));
    return s * (1.0f + x * (1.0f - s));
}

} // namespace

Tensor silu(const Tensor& x) {
    Tensor out = x;
    for (float& v : out.data) v = silu(v);
    return out;
}

std::vector<float> silu(const std::vector<float>& x) {
    std::vector<float> out = x;
    for (float& v : out) v = silu(v);
    return out;
}

Tensor silu_backward(const Tensor& x, const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= silu_grad(x.data[i]);
    return g;
}

std::vector<float> silu_backward(const std::vector<float>& x, const std::vector<float>& grad_out) {
    std::vector<float> g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= silu_grad(x[i]);
    return g;
}

Tensor avg_pool2(const Tensor& x) {
    require(x.h % 2 == 0 && x.w % 2 == 0, "avg_pool2: spatial size must be even");
    Tensor out(x.n, x.c, x.h / 2, x.w / 2);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx)
                    out.at(n, c, y, xx) = 0.25f * (x.at(n, c, 2 * y, 2 * xx) + x.at(n, c, 2 * y, 2 * xx + 1) +
                                                   x.at(n, c, 2 * y + 1, 2 * xx) + x.at(n, c, 2 * y + 1, 2 * xx + 1));
    return out;
}

Tensor avg_pool2_backward(const Tensor& g) {
    Tensor out(g.n, g.c, g.h * 2, g.w * 2);
    for (int n = 0; n < out.n; ++n)
        for (int c = 0; c < out.c; ++c)
            for (int y = 0; y < out.h; ++y)
                for (int x = 0; x < out.w; ++x) out.at(n, c, y, x) = 0.25f * g.at(n, c, y / 2, x / 2);
    return out;
}

Tensor upsample2(const Tensor& x) {
    Tensor out(x.n, x.c, x.h * 2, x.w * 2);
    for (int n = 0; n < out.n; ++n)
        for (int c = 0; c < out.c; ++c)
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx) out.at(n, c, y, xx) = x.at(n, c, y / 2, xx / 2);
    return out;
}

Tensor upsample2_backward(const Tensor& g) {
    Tensor out(g.n, g.c, g.h / 2, g.w / 2);
    for (int n = 0; n < g.n; ++n)
        for (int c = 0; c < g.c; ++c)
            for (int y = 0; y < g.h; ++y)
                for (int x = 0; x < g.w; ++x) out.at(n, c, y / 2, x / 2) += g.at(n, c, y, x);
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require(a.n == b.n && a.h == b.h && a.w == b.w, "concat_channels: shape mismatch");
    Tensor out(a.n, a.c + b.c, a.h, a.w);
    for (int n = 0; n < a.n; ++n) {
        std::copy(a.sample(n), a.sample(n) + a.sample_size(), out.sample(n));
        std::copy(b.sample(n), b.sample(n) + b.sample_size(), out.sample(n) + a.sample_size());
    }
    return out;
}

void split_channels(const Tensor& g, int a_channels, Tensor& ga, Tensor& gb) {
    ga = Tensor(g.n, a_channels, g.h, g.w);
    gb = Tensor(g.n, g.c - a_channels, g.h, g.w);
    for (int n = 0; n < g.n; ++n) {
        std::copy(g.sample(n), g.sample(n) + ga.sample_size(), ga.sample(n));
        std::copy(g.sample(n) + ga.sample_size(), g.sample(n) + g.sample_size(), gb.sample(n));
    }
}

void add_channel_bias(Tensor& x, const std::vector<float>& v) {
    require(v.size() == static_cast<std::size_t>(x.n) * x.c, "add_channel_bias: size mismatch");
    const std::size_t hw = x.plane();
    for (std::size_t nc = 0; nc < v.size(); ++nc) {
        float* p = x.data.data() + nc * hw;
        for (std::size_t i = 0; i < hw; ++i) p[i] += v[nc];
    }
}

std::vector<float> channel_sums(const Tensor& g) {
    const std::size_t hw = g.plane();
    std::vector<float> out(static_cast<std::size_t>(g.n) * g.c);
    for (std::size_t nc = 0; nc < out.size(); ++nc) {
        double s = 0.0;
        const float* p = g.data.data() + nc * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
        out[nc] = static_cast<float>(s);
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "add: shape mismatch");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    return out;
}

std::vector<float> global_avg_pool(const Tensor& x) {
    std::vector<float> out = channel_sums(x);
    const float inv = 1.0f / static_cast<float>(x.plane());
    for (float& v : out) v *= inv;
    return out;
}

Tensor global_avg_pool_backward(const std::vector<float>& grad_out, int n, int c, int h, int w) {
    Tensor g(n, c, h, w);
    const std::size_t hw = g.plane();
    const float inv = 1.0f / static_cast<float>(hw);
    for (std::size_t nc = 0; nc < grad_out.size(); ++nc)
        std::fill(g.data.begin() + nc * hw, g.data.begin() + (nc + 1) * hw, grad_out[nc] * inv);
    return g;
}

std::vector<float> timestep_embedding(const std::vector<int>& t, int dim) {
    require(dim % 2 == 0, "timestep_embedding: dim must be even");
    const int half = dim / 2;
    std::vector<float> out(t.size() * static_cast<std::size_t>(dim));
    for (std::size_t b = 0; b < t.size(); ++b) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / half);
            const double arg = t[b] * freq;
            out[b * dim + i] = static_cast<float>(std::sin(arg));
            out[b * dim + half + i] = static_cast<float>(std::cos(arg));
        }
    }
    return out;
}

double mse(const Tensor& pred, const Tensor& target) {
    require(pred.same_shape(target), "mse: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - target.data[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

Tensor mse_grad(const Tensor& pred, const Tensor& target, double weight) {
    Tensor g(pred.n, pred.c, pred.h, pred.w);
    const double scale = 2.0 * weight / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        g.data[i] = static_cast<float>(scale * (static_cast<double>(pred.data[i]) - target.data[i]));
    return g;
}

double softmax_cross_entropy(const std::vector<float>& logits, const std::vector<int>& labels, int classes,
                             std::vector<float>* grad) {
    const std::size_t batch = labels.size();
    require(logits.size() == batch * static_cast<std::size_t>(classes), "softmax_cross_entropy: size mismatch");
    if (grad) grad->assign(logits.size(), 0.0f);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const float* z = logits.data() + b * classes;
        const double zmax = *std::max_element(z, z + classes);
        double denom = 0.0;
        for (int c = 0; c < classes; ++c) denom += std::exp(z[c] - zmax);
        const int y = labels[b];
        loss += -(z[y] - zmax - std::log(denom));
        if (grad) {
            for (int c = 0; c < classes; ++c) {
                const double p = std::exp(z[c] - zmax) / denom;
                (*grad)[b * classes + c] = static_cast<float>((p - (c == y ? 1.0 : 0.0)) / static_cast<double>(batch));
            }
        }
    }
    return loss / static_cast<double>(batch);
}

} // namespace vstain::nn
