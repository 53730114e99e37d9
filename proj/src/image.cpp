#include "vstain/image.hpp"

#include "vstain/errors.hpp"

#include <algorithm>
#include <cmath>

namespace vstain {

std::string shape_string(const Image& img) {
    return "(" + std::to_string(img.channels) + ", " + std::to_string(img.height) + ", " +
           std::to_string(img.width) + ")";
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b))
        fail(ErrorKind::invalid_argument,
             std::string(what) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

Image operator+(const Image& a, const Image& b) {
    require_same_shape(a, b, "image add");
    Image out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Image operator-(const Image& a, const Image& b) {
    require_same_shape(a, b, "image subtract");
    Image out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Image operator*(double s, const Image& a) {
    Image out = a;
    for (double& v : out.data) v *= s;
    return out;
}

double max_abs_diff(const Image& a, const Image& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

bool all_finite(const Image& img) {
    return std::all_of(img.data.begin(), img.data.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> channel_means(const Image& img) {
    std::vector<double> means(static_cast<std::size_t>(img.channels), 0.0);
    if (img.plane() == 0) return means;
    for (int c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (double v : img.channel(c)) s += v;
        means[static_cast<std::size_t>(c)] = s / static_cast<double>(img.plane());
    }
    return means;
}

void clamp_inplace(Image& img, double lo, double hi) {
    for (double& v : img.data) v = std::clamp(v, lo, hi);
}

double normalize_byte(std::uint8_t v) noexcept { return static_cast<double>(v) / 127.5 - 1.0; }

std::uint8_t denormalize_value(double v) noexcept {
    const double s = std::round((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5);
    return static_cast<std::uint8_t>(std::clamp(s, 0.0, 255.0));
}

Image normalize(std::span<const std::uint8_t> hwc, int channels, int height, int width) {
    require(hwc.size() == static_cast<std::size_t>(channels) * height * width, "normalize: buffer size mismatch");
    Image img(channels, height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(c, y, x) = normalize_byte(hwc[(static_cast<std::size_t>(y) * width + x) * channels + c]);
    return img;
}

std::vector<std::uint8_t> denormalize(const Image& img) {
    std::vector<std::uint8_t> out(img.size());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] = denormalize_value(img.at(c, y, x));
    return out;
}

Image to_unit_range(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = (v + 1.0) * 0.5;
    return out;
}

} // namespace vstain
