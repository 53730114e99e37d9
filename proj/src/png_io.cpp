#include "vstain/png_io.hpp"

#include "vstain/errors.hpp"

#include <png.h>

#include <cstring>

namespace vstain {

Image read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        fail(ErrorKind::io_error, "cannot read PNG '" + path.string() + "': " + image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&image);
        fail(ErrorKind::io_error, "cannot decode PNG '" + path.string() + "': " + image.message);
    }
    return normalize(buf, 3, static_cast<int>(image.height), static_cast<int>(image.width));
}

void write_png_rgb8(const std::filesystem::path& path, const std::vector<std::uint8_t>& hwc, int height, int width) {
    require(hwc.size() == static_cast<std::size_t>(height) * width * 3, "write_png: buffer size mismatch");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, hwc.data(), 0, nullptr))
        fail(ErrorKind::io_error, "cannot write PNG '" + path.string() + "': " + image.message);
}

void write_png(const std::filesystem::path& path, const Image& img) {
    require(img.channels == 3, "write_png: expected a 3-channel image");
    write_png_rgb8(path, denormalize(img), img.height, img.width);
}

} // namespace vstain
