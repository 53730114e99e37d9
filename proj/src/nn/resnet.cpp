#include "vstain/nn/resnet.hpp"

#include "vstain/errors.hpp"

#include <algorithm>

namespace vstain::nn {

ResNetClassifier::ResNetClassifier(const ResNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    require(cfg.classes >= 2 && cfg.width >= 1, "ResNetClassifier: invalid config");
    const int w = cfg.width;
    stem_ = Conv2d("stem", cfg.in_channels, w, 3);
    res1_a_ = Conv2d("res1.conv_a", w, w, 3);
    res1_b_ = Conv2d("res1.conv_b", w, w, 3);
    widen_ = Conv2d("widen", w, 2 * w, 3);
    res2_a_ = Conv2d("res2.conv_a", 2 * w, 2 * w, 3);
    res2_b_ = Conv2d("res2.conv_b", 2 * w, 2 * w, 3);
    fc_ = Linear("fc", 2 * w, cfg.classes);

    Rng rng(seed);
    stem_.init(rng);
    res1_a_.init(rng);
    res1_b_.init(rng, 0.5f);
    widen_.init(rng);
    res2_a_.init(rng);
    res2_b_.init(rng, 0.5f);
    fc_.init(rng);
}

std::vector<Param*> ResNetClassifier::params() {
    std::vector<Param*> out;
    for (Conv2d* c : {&stem_, &res1_a_, &res1_b_, &widen_, &res2_a_, &res2_b_}) {
        out.push_back(&c->weight);
        out.push_back(&c->bias);
    }
    out.push_back(&fc_.weight);
    out.push_back(&fc_.bias);
    return out;
}

std::vector<const Param*> ResNetClassifier::params() const {
    auto mut = const_cast<ResNetClassifier*>(this)->params();
    return {mut.begin(), mut.end()};
}

void ResNetClassifier::zero_grad() {
    for (Param* p : params()) p->zero_grad();
}

std::vector<float> ResNetClassifier::forward(const Tensor& x) const {
    Cache scratch;
    return run(x, scratch);
}

std::vector<float> ResNetClassifier::forward(const Tensor& x, Cache& cache) const { return run(x, cache); }

std::vector<float> ResNetClassifier::run(const Tensor& x, Cache& c) const {
    require(x.c == cfg_.in_channels, "ResNetClassifier: channel mismatch");
    require(x.h % 2 == 0 && x.w % 2 == 0, "ResNetClassifier: spatial size must be even");
    c.x = x;
    c.stem_pre = stem_.forward(x);
    c.a0 = silu(c.stem_pre);
    c.r1a = res1_a_.forward(c.a0);
    c.r1b = res1_b_.forward(silu(c.r1a));
    c.sum1 = add(c.a0, c.r1b);
    c.a1 = silu(c.sum1);
    c.pooled = avg_pool2(c.a1);
    c.widen_pre = widen_.forward(c.pooled);
    c.b0 = silu(c.widen_pre);
    c.r2a = res2_a_.forward(c.b0);
    c.r2b = res2_b_.forward(silu(c.r2a));
    c.sum2 = add(c.b0, c.r2b);
    c.b1 = silu(c.sum2);
    c.features = global_avg_pool(c.b1);
    return fc_.forward(c.features, x.n);
}

void ResNetClassifier::backward(const Cache& c, const std::vector<float>& grad_logits) {
    const int n = c.x.n;
    const auto g_feat = fc_.backward(c.features, grad_logits, n);
    Tensor g_b1 = global_avg_pool_backward(g_feat, n, c.b1.c, c.b1.h, c.b1.w);
    Tensor g_sum2 = silu_backward(c.sum2, g_b1);
    Tensor g_r2a_act = res2_b_.backward(silu(c.r2a), g_sum2);
    Tensor g_b0 = add(g_sum2, res2_a_.backward(c.b0, silu_backward(c.r2a, g_r2a_act)));
    Tensor g_pooled = widen_.backward(c.pooled, silu_backward(c.widen_pre, g_b0));
    Tensor g_a1 = avg_pool2_backward(g_pooled);
    Tensor g_sum1 = silu_backward(c.sum1, g_a1);
    Tensor g_r1a_act = res1_b_.backward(silu(c.r1a), g_sum1);
    Tensor g_a0 = add(g_sum1, res1_a_.backward(c.a0, silu_backward(c.r1a, g_r1a_act)));
    stem_.backward(c.x, silu_backward(c.stem_pre, g_a0), false);
}

std::vector<int> ResNetClassifier::predict(const Tensor& x) const {
    const auto logits = forward(x);
    std::vector<int> out(static_cast<std::size_t>(x.n));
    for (int i = 0; i < x.n; ++i) {
        const float* z = logits.data() + i * cfg_.classes;
        out[static_cast<std::size_t>(i)] = static_cast<int>(std::max_element(z, z + cfg_.classes) - z);
    }
    return out;
}

} // namespace vstain::nn
