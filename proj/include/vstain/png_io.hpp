#pragma once

#include "vstain/image.hpp"

#include <filesystem>

namespace vstain {

// 8-bit RGB PNG <-> model-range image.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

// Writes an unnormalized 8-bit RGB buffer (row-major HWC).
void write_png_rgb8(const std::filesystem::path& path, const std::vector<std::uint8_t>& hwc, int height, int width);

} // namespace vstain
