#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace vstain::nn {

// NCHW float tensor.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f)
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t size() const noexcept { return data.size(); }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
    std::size_t sample_size() const noexcept { return static_cast<std::size_t>(c) * h * w; }

    float* sample(int i) { return data.data() + i * sample_size(); }
    const float* sample(int i) const { return data.data() + i * sample_size(); }

    float& at(int ni, int ci, int y, int x) {
        return data[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
    }
    float at(int ni, int ci, int y, int x) const {
        return data[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
    }

    bool same_shape(const Tensor& o) const noexcept { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

// A trainable array with its gradient accumulator.
struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<float> value;
    std::vector<float> grad;

    Param() = default;
    Param(std::string name_, std::vector<int> shape_);

    std::size_t size() const noexcept { return value.size(); }
    void zero_grad();
};

} // namespace vstain::nn
