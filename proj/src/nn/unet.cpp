#include "vstain/nn/unet.hpp"

#include "vstain/errors.hpp"

namespace vstain::nn {

UNet::UNet(const UNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    require(cfg.width >= 1 && cfg.temb_dim >= 2 && cfg.temb_dim % 2 == 0, "UNet: invalid config");
    const int w = cfg.width;
    const int hidden = 2 * cfg.temb_dim;
    temb_ = Linear("temb", cfg.temb_dim, hidden);
    auto block = [&](const std::string& name, int in, int out) {
        return Block{Conv2d(name + ".conv_a", in, out, 3), Conv2d(name + ".conv_b", out, out, 3),
                     Linear(name + ".emb", hidden, out)};
    };
    enc1_ = block("enc1", cfg.in_channels, w);
    enc2_ = block("enc2", w, 2 * w);
    mid_ = block("mid", 2 * w, 4 * w);
    dec2_ = block("dec2", 4 * w + 2 * w, 2 * w);
    dec1_ = block("dec1", 2 * w + w, w);
    head_ = Conv2d("head", w, cfg.out_channels, 1);

    Rng rng(seed);
    temb_.init(rng);
    for (Block* b : {&enc1_, &enc2_, &mid_, &dec2_, &dec1_}) {
        b->a.init(rng);
        b->b.init(rng);
        b->emb.init(rng, 0.5f);
    }
    head_.init(rng, 0.1f);
}

std::vector<Param*> UNet::params() {
    std::vector<Param*> out{&temb_.weight, &temb_.bias};
    for (Block* b : {&enc1_, &enc2_, &mid_, &dec2_, &dec1_})
        for (Param* p : {&b->a.weight, &b->a.bias, &b->b.weight, &b->b.bias, &b->emb.weight, &b->emb.bias})
            out.push_back(p);
    out.push_back(&head_.weight);
    out.push_back(&head_.bias);
    return out;
}

std::vector<const Param*> UNet::params() const {
    auto mut = const_cast<UNet*>(this)->params();
    return {mut.begin(), mut.end()};
}

std::size_t UNet::parameter_count() const {
    std::size_t n = 0;
    for (const Param* p : params()) n += p->size();
    return n;
}

void UNet::zero_grad() {
    for (Param* p : params()) p->zero_grad();
}

Tensor UNet::forward(const Tensor& x, const std::vector<int>& t) const {
    Cache scratch;
    return run(x, t, scratch);
}

Tensor UNet::forward(const Tensor& x, const std::vector<int>& t, Cache& cache) const { return run(x, t, cache); }

Tensor UNet::run(const Tensor& x, const std::vector<int>& t, Cache& c) const {
    require(x.c == cfg_.in_channels, "UNet: expected " + std::to_string(cfg_.in_channels) + " input channels");
    require(x.h % 4 == 0 && x.w % 4 == 0, "UNet: spatial size must be divisible by 4");
    require(t.size() == static_cast<std::size_t>(x.n), "UNet: one timestep per batch entry required");
    const int n = x.n;

    c.t = t;
    c.x = x;
    c.temb_in = timestep_embedding(t, cfg_.temb_dim);
    c.temb_pre = temb_.forward(c.temb_in, n);
    c.temb_act = silu(c.temb_pre);
    const Block* blocks[5] = {&enc1_, &enc2_, &mid_, &dec2_, &dec1_};
    for (int i = 0; i < 5; ++i) c.level_emb[i] = blocks[i]->emb.forward(c.temb_act, n);

    c.e1a = enc1_.a.forward(x);
    add_channel_bias(c.e1a, c.level_emb[0]);
    c.e1b = enc1_.b.forward(silu(c.e1a));
    c.s1 = silu(c.e1b);
    c.p1 = avg_pool2(c.s1);

    c.e2a = enc2_.a.forward(c.p1);
    add_channel_bias(c.e2a, c.level_emb[1]);
    c.e2b = enc2_.b.forward(silu(c.e2a));
    c.s2 = silu(c.e2b);
    c.p2 = avg_pool2(c.s2);

    c.e3a = mid_.a.forward(c.p2);
    add_channel_bias(c.e3a, c.level_emb[2]);
    c.e3b = mid_.b.forward(silu(c.e3a));
    c.s3 = silu(c.e3b);

    c.c2 = concat_channels(upsample2(c.s3), c.s2);
    c.d2a = dec2_.a.forward(c.c2);
    add_channel_bias(c.d2a, c.level_emb[3]);
    c.d2b = dec2_.b.forward(silu(c.d2a));
    c.q2 = silu(c.d2b);

    c.c1 = concat_channels(upsample2(c.q2), c.s1);
    c.d1a = dec1_.a.forward(c.c1);
    add_channel_bias(c.d1a, c.level_emb[4]);
    c.d1b = dec1_.b.forward(silu(c.d1a));
    c.q1 = silu(c.d1b);

    return head_.forward(c.q1);
}

void UNet::backward(const Cache& c, const Tensor& grad_out) {
    const int n = c.x.n;
    std::array<std::vector<float>, 5> g_emb;

    // Backward through one block: returns grad wrt block input; `pre_a`, `pre_b` are conv outputs.
    auto block_back = [&](Block& blk, int level, const Tensor& input, const Tensor& pre_a, const Tensor& pre_b,
                          const Tensor& g_act, bool need_input) {
        Tensor g_b = silu_backward(pre_b, g_act);
        Tensor g_act_a = blk.b.backward(silu(pre_a), g_b);
        Tensor g_a = silu_backward(pre_a, g_act_a);
        g_emb[level] = channel_sums(g_a);
        return blk.a.backward(input, g_a, need_input);
    };

    Tensor g_q1 = head_.backward(c.q1, grad_out);
    Tensor g_c1 = block_back(dec1_, 4, c.c1, c.d1a, c.d1b, g_q1, true);
    Tensor g_up1, g_s1_skip;
    split_channels(g_c1, 2 * cfg_.width, g_up1, g_s1_skip);
    Tensor g_q2 = upsample2_backward(g_up1);

    Tensor g_c2 = block_back(dec2_, 3, c.c2, c.d2a, c.d2b, g_q2, true);
    Tensor g_up2, g_s2_skip;
    split_channels(g_c2, 4 * cfg_.width, g_up2, g_s2_skip);
    Tensor g_s3 = upsample2_backward(g_up2);

    Tensor g_p2 = block_back(mid_, 2, c.p2, c.e3a, c.e3b, g_s3, true);
    Tensor g_s2 = add(avg_pool2_backward(g_p2), g_s2_skip);
    Tensor g_p1 = block_back(enc2_, 1, c.p1, c.e2a, c.e2b, g_s2, true);
    Tensor g_s1 = add(avg_pool2_backward(g_p1), g_s1_skip);
    block_back(enc1_, 0, c.x, c.e1a, c.e1b, g_s1, false);

    Block* blocks[5] = {&enc1_, &enc2_, &mid_, &dec2_, &dec1_};
    std::vector<float> g_temb_act(c.temb_act.size(), 0.0f);
    for (int i = 0; i < 5; ++i) {
        const auto gi = blocks[i]->emb.backward(c.temb_act, g_emb[i], n);
        for (std::size_t j = 0; j < gi.size(); ++j) g_temb_act[j] += gi[j];
    }
    temb_.backward(c.temb_in, silu_backward(c.temb_pre, g_temb_act), n);
}

} // namespace vstain::nn
