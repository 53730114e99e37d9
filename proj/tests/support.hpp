#pragma once

#include "vstain/errors.hpp"
#include "vstain/image.hpp"
#include "vstain/rng.hpp"

#include <doctest.h>

#include <filesystem>
#include <string>

namespace vstain::test {

inline Image random_image(int c, int h, int w, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    Image img(c, h, w);
    for (double& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

inline Image normal_image(int c, int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Image img(c, h, w);
    for (double& v : img.data) v = rng.normal();
    return img;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("vstain_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace vstain::test

#define CHECK_ERROR_KIND(expr, expected_kind)                                      \
    do {                                                                           \
        bool thrown_ = false;                                                      \
        try {                                                                      \
            (void)(expr);                                                          \
        } catch (const ::vstain::Error& e_) {                                      \
            thrown_ = true;                                                        \
            CHECK_MESSAGE(e_.kind() == (expected_kind), "got kind ",               \
                          std::string(::vstain::to_string(e_.kind())), ": ", e_.what()); \
        }                                                                          \
        CHECK_MESSAGE(thrown_, "expected a vstain::Error");                        \
    } while (0)
