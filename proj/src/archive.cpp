#include "vstain/archive.hpp"

#include "vstain/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace vstain {

namespace {

constexpr char kMagic[8] = {'V', 'S', 'T', 'N', 'A', 'R', 'C', 'H'};

template <class T>
Archive::Array make_array(const char* dtype, const std::vector<T>& v, std::vector<std::int64_t> shape) {
    Archive::Array a;
    a.dtype = dtype;
    a.shape = shape.empty() ? std::vector<std::int64_t>{static_cast<std::int64_t>(v.size())} : std::move(shape);
    a.bytes.resize(v.size() * sizeof(T));
    if (!v.empty()) std::memcpy(a.bytes.data(), v.data(), a.bytes.size());
    return a;
}

template <class T>
std::vector<T> read_array(const Archive& ar, const std::string& name, const char* dtype) {
    auto it = ar.arrays.find(name);
    if (it == ar.arrays.end()) fail(ErrorKind::parse_error, "archive has no array '" + name + "'");
    if (it->second.dtype != dtype)
        fail(ErrorKind::parse_error, "archive array '" + name + "' has dtype " + it->second.dtype + ", expected " + dtype);
    std::vector<T> v(it->second.bytes.size() / sizeof(T));
    if (!v.empty()) std::memcpy(v.data(), it->second.bytes.data(), v.size() * sizeof(T));
    return v;
}

std::size_t dtype_size(const std::string& dtype) {
    if (dtype == "f32") return 4;
    if (dtype == "f64") return 8;
    fail(ErrorKind::parse_error, "unknown archive dtype '" + dtype + "'");
}

} // namespace

void Archive::put_f32(const std::string& name, const std::vector<float>& v, std::vector<std::int64_t> shape) {
    arrays[name] = make_array("f32", v, std::move(shape));
}

void Archive::put_f64(const std::string& name, const std::vector<double>& v, std::vector<std::int64_t> shape) {
    arrays[name] = make_array("f64", v, std::move(shape));
}

std::vector<float> Archive::get_f32(const std::string& name) const { return read_array<float>(*this, name, "f32"); }

std::vector<double> Archive::get_f64(const std::string& name) const { return read_array<double>(*this, name, "f64"); }

void save_archive(const std::filesystem::path& path, const Archive& archive) {
    nlohmann::json header;
    header["meta"] = archive.meta;
    header["arrays"] = nlohmann::json::array();
    for (const auto& [name, arr] : archive.arrays)
        header["arrays"].push_back({{"name", name}, {"dtype", arr.dtype}, {"shape", arr.shape}});
    const std::string text = header.dump();

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::io_error, "cannot write archive '" + path.string() + "'");
        const std::uint32_t version = kArchiveFormatVersion;
        const std::uint64_t len = text.size();
        out.write(kMagic, sizeof kMagic);
        out.write(reinterpret_cast<const char*>(&version), sizeof version);
        out.write(reinterpret_cast<const char*>(&len), sizeof len);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& [name, arr] : archive.arrays)
            out.write(reinterpret_cast<const char*>(arr.bytes.data()), static_cast<std::streamsize>(arr.bytes.size()));
        if (!out) fail(ErrorKind::io_error, "short write to archive '" + path.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

Archive load_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io_error, "cannot open checkpoint '" + path.string() + "'");
    char magic[8] = {};
    std::uint32_t version = 0;
    std::uint64_t len = 0;
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        fail(ErrorKind::parse_error, "'" + path.string() + "' is not a checkpoint archive");
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    if (version != kArchiveFormatVersion)
        fail(ErrorKind::version_error, "checkpoint '" + path.string() + "' has format version " +
                                           std::to_string(version) + ", expected " +
                                           std::to_string(kArchiveFormatVersion));
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) fail(ErrorKind::parse_error, "truncated checkpoint header in '" + path.string() + "'");

    Archive ar;
    const auto header = nlohmann::json::parse(text);
    ar.meta = header.at("meta");
    for (const auto& entry : header.at("arrays")) {
        Archive::Array arr;
        arr.dtype = entry.at("dtype").get<std::string>();
        arr.shape = entry.at("shape").get<std::vector<std::int64_t>>();
        std::size_t count = 1;
        for (auto d : arr.shape) count *= static_cast<std::size_t>(d);
        arr.bytes.resize(count * dtype_size(arr.dtype));
        in.read(reinterpret_cast<char*>(arr.bytes.data()), static_cast<std::streamsize>(arr.bytes.size()));
        if (!in) fail(ErrorKind::parse_error, "truncated checkpoint payload in '" + path.string() + "'");
        ar.arrays.emplace(entry.at("name").get<std::string>(), std::move(arr));
    }
    return ar;
}

} // namespace vstain
