#pragma once

#include "vstain/image.hpp"

#include <vector>

namespace vstain {

// Normalized 1-D Gaussian of length 2 * radius + 1.
std::vector<double> gaussian_kernel(double sigma, int radius);

// Separable Gaussian blur of every channel with reflect boundaries.
Image gaussian_blur(const Image& img, double sigma);

// Reflect-101 index into [0, n).
int reflect_index(int i, int n) noexcept;

// Bilinear sample of channel `c` at fractional (y, x) with reflect padding.
double sample_bilinear(const Image& img, int c, double y, double x) noexcept;

// Weighted luminance (ITU-R BT.601) of a 3-channel image; single channel out.
Image luminance(const Image& rgb);

} // namespace vstain
