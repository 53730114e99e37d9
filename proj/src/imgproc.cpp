#include "vstain/imgproc.hpp"

#include "vstain/errors.hpp"

#include <cmath>

namespace vstain {

std::vector<double> gaussian_kernel(double sigma, int radius) {
    require(sigma > 0.0 && radius >= 0, "gaussian_kernel: sigma must be positive");
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

int reflect_index(int i, int n) noexcept {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

Image gaussian_blur(const Image& img, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    const auto k = gaussian_kernel(sigma, radius);
    Image tmp(img.channels, img.height, img.width);
    Image out(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    s += k[static_cast<std::size_t>(i + radius)] * img.at(c, y, reflect_index(x + i, img.width));
                tmp.at(c, y, x) = s;
            }
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    s += k[static_cast<std::size_t>(i + radius)] * tmp.at(c, reflect_index(y + i, img.height), x);
                out.at(c, y, x) = s;
            }
    }
    return out;
}

double sample_bilinear(const Image& img, int c, double y, double x) noexcept {
    const double fy = std::floor(y), fx = std::floor(x);
    const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
    const double wy = y - fy, wx = x - fx;
    auto px = [&](int yy, int xx) {
        return img.at(c, reflect_index(yy, img.height), reflect_index(xx, img.width));
    };
    double v = (1.0 - wy) * (1.0 - wx) * px(y0, x0);
    if (wx != 0.0) v += (1.0 - wy) * wx * px(y0, x0 + 1);
    if (wy != 0.0) v += wy * (1.0 - wx) * px(y0 + 1, x0);
    if (wy != 0.0 && wx != 0.0) v += wy * wx * px(y0 + 1, x0 + 1);
    return v;
}

Image luminance(const Image& rgb) {
    require(rgb.channels == 3, "luminance: expected 3 channels, got " + std::to_string(rgb.channels));
    Image y(1, rgb.height, rgb.width);
    const auto r = rgb.channel(0), g = rgb.channel(1), b = rgb.channel(2);
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    return y;
}

} // namespace vstain
