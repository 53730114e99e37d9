#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vstain {

// Planar CHW image in double precision. Model-range images live in [-1, 1].
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image() = default;
    Image(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t size() const noexcept { return data.size(); }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }

    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

    std::span<double> channel(int c) { return {data.data() + c * plane(), plane()}; }
    std::span<const double> channel(int c) const { return {data.data() + c * plane(), plane()}; }

    bool same_shape(const Image& o) const noexcept {
        return channels == o.channels && height == o.height && width == o.width;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

std::string shape_string(const Image& img);

// Throws invalid_argument naming `what` when shapes differ.
void require_same_shape(const Image& a, const Image& b, const char* what);

Image operator+(const Image& a, const Image& b);
Image operator-(const Image& a, const Image& b);
Image operator*(double s, const Image& a);

double max_abs_diff(const Image& a, const Image& b);
bool all_finite(const Image& img);

// Per-channel mean.
std::vector<double> channel_means(const Image& img);

void clamp_inplace(Image& img, double lo, double hi);

// 8-bit interleaved RGB <-> model range [-1, 1].
double normalize_byte(std::uint8_t v) noexcept;
std::uint8_t denormalize_value(double v) noexcept;
Image normalize(std::span<const std::uint8_t> hwc, int channels, int height, int width);
std::vector<std::uint8_t> denormalize(const Image& img);

// Model range [-1, 1] -> unit range [0, 1].
Image to_unit_range(const Image& img);

} // namespace vstain
