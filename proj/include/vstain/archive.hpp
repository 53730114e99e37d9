#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vstain {

inline constexpr std::uint32_t kArchiveFormatVersion = 1;

/// Checkpoint container shared by the denoiser and the classifier.
///
/// Layout: 8-byte magic "VSTNARCH", u32 format version, u64 header length,
/// UTF-8 JSON header, then the raw little-endian payload of every array in
/// header order. The header carries free-form metadata under "meta" and an
/// "arrays" index of {name, dtype, shape}.
struct Archive {
    struct Array {
        std::string dtype; // "f32" or "f64"
        std::vector<std::int64_t> shape;
        std::vector<std::uint8_t> bytes;
    };

    nlohmann::json meta = nlohmann::json::object();
    std::map<std::string, Array> arrays;

    void put_f32(const std::string& name, const std::vector<float>& v, std::vector<std::int64_t> shape = {});
    void put_f64(const std::string& name, const std::vector<double>& v, std::vector<std::int64_t> shape = {});
    std::vector<float> get_f32(const std::string& name) const;
    std::vector<double> get_f64(const std::string& name) const;
    bool has(const std::string& name) const { return arrays.contains(name); }
};

void save_archive(const std::filesystem::path& path, const Archive& archive);
Archive load_archive(const std::filesystem::path& path);

} // namespace vstain
