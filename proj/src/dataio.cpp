#include "vstain/dataio.hpp"

#include "vstain/errors.hpp"
#include "vstain/imgproc.hpp"
#include "vstain/png_io.hpp"
#include "vstain/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace vstain {

int parse_her2_label(std::string_view token) {
    if (token == "0" || token == "0+") return 0;
    if (token == "1+" || token == "1") return 1;
    if (token == "2+" || token == "2") return 2;
    if (token == "3+" || token == "3") return 3;
    fail(ErrorKind::parse_error, "unknown HER2 label token '" + std::string(token) + "'");
}

std::string her2_token(int her2) {
    switch (her2) {
    case 0: return "0";
    case 1: return "1+";
    case 2: return "2+";
    case 3: return "3+";
    }
    fail(ErrorKind::invalid_argument, "HER2 score out of range: " + std::to_string(her2));
}

int class_label(const PairedPatch& p, bool binarize) noexcept { return binarize ? (p.binary_label() ? 1 : 0) : p.her2; }

std::vector<PairedPatch> Dataset::subset(const std::vector<std::string>& ids) const {
    std::vector<PairedPatch> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(by_id(id));
    return out;
}

const PairedPatch& Dataset::by_id(const std::string& id) const {
    auto it = std::lower_bound(records.begin(), records.end(), id,
                               [](const PairedPatch& p, const std::string& key) { return p.id < key; });
    if (it == records.end() || it->id != id) fail(ErrorKind::missing_pair, "no record with id '" + id + "'");
    return *it;
}

namespace {

std::map<std::string, fs::path> list_pngs(const fs::path& dir) {
    std::map<std::string, fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
        out.emplace(entry.path().stem().string(), entry.path());
    }
    return out;
}

std::map<std::string, int> read_labels(const fs::path& csv) {
    std::map<std::string, int> labels;
    std::ifstream in(csv);
    if (!in) fail(ErrorKind::io_error, "cannot open '" + csv.string() + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            fail(ErrorKind::parse_error, csv.string() + ":" + std::to_string(lineno) + ": expected 'id,her2'");
        const std::string id = line.substr(0, comma);
        std::string tok = line.substr(comma + 1);
        if (const auto c2 = tok.find(','); c2 != std::string::npos) tok.resize(c2);
        if (lineno == 1 && id == "id") continue;
        labels[id] = parse_her2_label(tok);
    }
    return labels;
}

int label_from_stem(const std::string& stem) {
    const auto pos = stem.rfind('_');
    if (pos == std::string::npos)
        fail(ErrorKind::parse_error, "no labels.csv and no label token in file name '" + stem + "'");
    return parse_her2_label(std::string_view(stem).substr(pos + 1));
}

} // namespace

Dataset load_bci(const fs::path& root, double val_fraction, std::uint64_t split_seed) {
    require(val_fraction >= 0.0 && val_fraction < 1.0, "val_fraction must be in [0, 1)");
    const fs::path he_root = root / "HE", ihc_root = root / "IHC";
    if (!fs::is_directory(he_root) || !fs::is_directory(ihc_root))
        fail(ErrorKind::io_error, "'" + root.string() + "' must contain HE/ and IHC/ directories");

    std::optional<std::map<std::string, int>> labels;
    if (fs::exists(root / "labels.csv")) labels = read_labels(root / "labels.csv");

    Dataset ds;
    ds.split.val_fraction = val_fraction;
    std::vector<std::string> train_ids;

    const bool split_layout = fs::is_directory(he_root / "train") || fs::is_directory(he_root / "test");
    const std::vector<std::string> splits = split_layout ? std::vector<std::string>{"train", "test"}
                                                         : std::vector<std::string>{""};
    std::set<std::string> seen;
    for (const auto& split : splits) {
        const auto he_files = list_pngs(split.empty() ? he_root : he_root / split);
        const auto ihc_files = list_pngs(split.empty() ? ihc_root : ihc_root / split);
        for (const auto& [id, path] : he_files)
            if (!ihc_files.contains(id)) fail(ErrorKind::missing_pair, "H&E patch '" + id + "' has no IHC mate");
        for (const auto& [id, path] : ihc_files)
            if (!he_files.contains(id)) fail(ErrorKind::missing_pair, "IHC patch '" + id + "' has no H&E mate");
        for (const auto& [id, he_path] : he_files) {
            if (!seen.insert(id).second) fail(ErrorKind::parse_error, "duplicate patch id '" + id + "'");
            PairedPatch p;
            p.id = id;
            p.he = read_png(he_path);
            p.ihc = read_png(ihc_files.at(id));
            if (!p.he.same_shape(p.ihc))
                fail(ErrorKind::invalid_argument, "patch '" + id + "': H&E and IHC sizes differ");
            if (labels) {
                auto it = labels->find(id);
                if (it == labels->end()) fail(ErrorKind::parse_error, "labels.csv has no entry for '" + id + "'");
                p.her2 = it->second;
            } else {
                p.her2 = label_from_stem(id);
            }
            (split == "train" ? train_ids : ds.split.test).push_back(id);
            ds.records.push_back(std::move(p));
        }
    }
    std::sort(ds.records.begin(), ds.records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    std::sort(train_ids.begin(), train_ids.end());
    Rng rng(split_seed);
    rng.shuffle(train_ids.begin(), train_ids.end());
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(train_ids.size())));
    ds.split.val.assign(train_ids.begin(), train_ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    ds.split.train.assign(train_ids.begin() + static_cast<std::ptrdiff_t>(n_val), train_ids.end());
    std::sort(ds.split.train.begin(), ds.split.train.end());
    std::sort(ds.split.val.begin(), ds.split.val.end());
    std::sort(ds.split.test.begin(), ds.split.test.end());
    return ds;
}

void write_bci(const fs::path& root, const std::vector<PairedPatch>& records, const std::vector<std::string>& test_ids) {
    const std::set<std::string> test(test_ids.begin(), test_ids.end());
    for (const char* stain : {"HE", "IHC"})
        for (const char* split : {"train", "test"}) fs::create_directories(root / stain / split);
    std::vector<const PairedPatch*> sorted;
    for (const auto& p : records) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

    std::ofstream labels(root / "labels.csv", std::ios::binary);
    if (!labels) fail(ErrorKind::io_error, "cannot write '" + (root / "labels.csv").string() + "'");
    labels << "id,her2\n";
    for (const PairedPatch* p : sorted) {
        const char* split = test.contains(p->id) ? "test" : "train";
        write_png(root / "HE" / split / (p->id + ".png"), p->he);
        write_png(root / "IHC" / split / (p->id + ".png"), p->ihc);
        labels << p->id << ',' << her2_token(p->her2) << '\n';
    }
}

namespace {

struct Rgb {
    double r, g, b;
};

Rgb mix(Rgb a, Rgb b, double t) { return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t}; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Zero-mean, unit-variance smoothed noise field.
Image smooth_field(int size, double sigma, Rng& rng) {
    Image f(1, size, size);
    for (double& v : f.data) v = rng.normal();
    f = gaussian_blur(f, sigma);
    double mean = 0.0, var = 0.0;
    for (double v : f.data) mean += v;
    mean /= static_cast<double>(f.size());
    for (double v : f.data) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(f.size()));
    for (double& v : f.data) v = (v - mean) / (sd > 0 ? sd : 1.0);
    return f;
}

constexpr Rgb kHeBackground{0.94, 0.90, 0.93};
constexpr Rgb kEosin{0.90, 0.50, 0.70};
constexpr Rgb kHematoxylin{0.35, 0.20, 0.55};
constexpr Rgb kIhcBackground{0.93, 0.93, 0.92};
constexpr Rgb kCounterstain{0.84, 0.86, 0.92}; // pale hematoxylin counterstain of unstained tissue
constexpr Rgb kIhcNucleus{0.40, 0.45, 0.72};
constexpr Rgb kDab{0.55, 0.33, 0.15};

} // namespace

SynthPatch synth_patch(const std::string& id, int size, int her2, std::uint64_t seed, const SynthOptions& opts) {
    require(size >= 4, "synth_patch: size must be >= 4");
    require(her2 >= 0 && her2 <= 3, "synth_patch: HER2 score out of range");
    Rng rng(seed);

    Image tissue(1, size, size);
    if (opts.structure == SynthStructure::blobs) {
        const Image field = smooth_field(size, size / 10.0, rng);
        for (std::size_t i = 0; i < tissue.size(); ++i) tissue.data[i] = sigmoid((field.data[i] - 0.4) / 0.15);
    } else {
        const double cy = rng.uniform(0.35, 0.65) * size, cx = rng.uniform(0.35, 0.65) * size;
        const double radius = 0.22 * size;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double d = std::hypot(y + 0.5 - cy, x + 0.5 - cx);
                tissue.at(0, y, x) = sigmoid((radius - d) / 1.0);
            }
    }
    const Image texture = smooth_field(size, 1.0, rng);

    const double expression = her2 + opts.expression_noise * rng.normal();
    const double hema_level = std::clamp(0.20 + 0.15 * expression, 0.0, 1.0);
    const double dab_level = std::clamp(0.05 + 0.25 * expression, 0.0, 1.0);

    int dy = 0, dx = 0;
    if (opts.max_shift > 0) {
        dy = static_cast<int>(rng.below(2 * static_cast<std::uint64_t>(opts.max_shift) + 1)) - opts.max_shift;
        dx = static_cast<int>(rng.below(2 * static_cast<std::uint64_t>(opts.max_shift) + 1)) - opts.max_shift;
    }

    SynthPatch out;
    out.expression = expression;
    out.tissue_mask = tissue;
    PairedPatch& p = out.patch;
    p.id = id;
    p.her2 = her2;
    p.he = Image(3, size, size);
    p.ihc = Image(3, size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double nuc = sigmoid(1.5 * texture.at(0, y, x));
            const Rgb he = mix(kHeBackground, mix(kEosin, kHematoxylin, hema_level * nuc), tissue.at(0, y, x));
            const int sy = reflect_index(y + dy, size), sx = reflect_index(x + dx, size);
            const double snuc = sigmoid(1.5 * texture.at(0, sy, sx));
            // DAB marks the membrane around nuclei; nuclei keep the blue counterstain
            const Rgb membrane = mix(kCounterstain, kDab, dab_level);
            const Rgb ihc = mix(kIhcBackground, mix(membrane, kIhcNucleus, snuc), tissue.at(0, sy, sx));
            const double he_rgb[3] = {he.r, he.g, he.b};
            const double ihc_rgb[3] = {ihc.r, ihc.g, ihc.b};
            for (int c = 0; c < 3; ++c) {
                p.he.at(c, y, x) = std::clamp(2.0 * (he_rgb[c] + opts.pixel_noise * rng.normal()) - 1.0, -1.0, 1.0);
                p.ihc.at(c, y, x) = std::clamp(2.0 * (ihc_rgb[c] + opts.pixel_noise * rng.normal()) - 1.0, -1.0, 1.0);
            }
        }
    return out;
}

std::vector<PairedPatch> synth_dataset(int n, int size, const std::array<double, 4>& class_balance, std::uint64_t seed,
                                       const SynthOptions& opts) {
    require(n >= 1, "synth_dataset: n must be >= 1");
    double total = 0.0;
    for (double p : class_balance) {
        require(std::isfinite(p) && p >= 0.0, "synth_dataset: class probabilities must be non-negative");
        total += p;
    }
    require(std::abs(total - 1.0) <= 1e-9, "synth_dataset: class probabilities must sum to 1");

    Rng class_rng(mix_seed(seed, 0));
    std::vector<PairedPatch> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double u = class_rng.uniform();
        int her2 = 3;
        double acc = 0.0;
        for (int c = 0; c < 4; ++c) {
            acc += class_balance[static_cast<std::size_t>(c)];
            if (u < acc && class_balance[static_cast<std::size_t>(c)] > 0.0) {
                her2 = c;
                break;
            }
        }
        while (class_balance[static_cast<std::size_t>(her2)] == 0.0) --her2;
        char id[32];
        std::snprintf(id, sizeof id, "synth_%05d", i);
        out.push_back(synth_patch(id, size, her2, mix_seed(seed, static_cast<std::uint64_t>(i) + 1), opts).patch);
    }
    return out;
}

double brown_intensity(const Image& img) {
    require(img.channels == 3, "brown_intensity: expected RGB");
    const auto r = img.channel(0), b = img.channel(2);
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += 0.5 * (r[i] - b[i]);
    return s / static_cast<double>(r.size());
}

std::vector<double> mean_color(const std::vector<Image>& images) {
    require(!images.empty(), "mean_color: empty set");
    std::vector<double> acc(static_cast<std::size_t>(images.front().channels), 0.0);
    for (const auto& img : images) {
        const auto m = channel_means(img);
        for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += m[c];
    }
    for (double& v : acc) v /= static_cast<double>(images.size());
    return acc;
}

std::vector<std::string> split_test_ids(const std::vector<PairedPatch>& records, double test_fraction,
                                        std::uint64_t seed) {
    require(test_fraction >= 0.0 && test_fraction <= 1.0, "test fraction must be in [0, 1]");
    std::vector<std::string> ids;
    for (const auto& p : records) ids.push_back(p.id);
    std::sort(ids.begin(), ids.end());
    Rng rng(mix_seed(seed, 0x5eed));
    rng.shuffle(ids.begin(), ids.end());
    ids.resize(static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ids.size()))));
    std::sort(ids.begin(), ids.end());
    return ids;
}

} // namespace vstain
