#include "vstain/quality_metrics.hpp"

#include "vstain/errors.hpp"
#include "vstain/imgproc.hpp"
#include "vstain/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace vstain {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const Image& gray(const Image& img, Image& storage) {
    if (img.channels == 1) return img;
    storage = luminance(img);
    return storage;
}

// Valid-mode separable filtering of a single-channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& k) {
    const int r = kWindow;
    const int oh = h - r + 1, ow = w - r + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < r; ++i) s += k[static_cast<std::size_t>(i)] * plane[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < r; ++i) s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

} // namespace

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    require(a.channels == 1 || a.channels == 3, "ssim: expected 1 or 3 channels");
    require(a.height >= kWindow && a.width >= kWindow, "ssim: images must be at least 11x11");
    Image sa, sb;
    const Image& ga = gray(a, sa);
    const Image& gb = gray(b, sb);
    const int h = ga.height, w = ga.width;
    const auto k = gaussian_kernel(kSigma, kWindow / 2);

    std::vector<double> aa(ga.size()), bb(ga.size()), ab(ga.size());
    for (std::size_t i = 0; i < ga.size(); ++i) {
        aa[i] = ga.data[i] * ga.data[i];
        bb[i] = gb.data[i] * gb.data[i];
        ab[i] = ga.data[i] * gb.data[i];
    }
    const auto mu_a = filter_valid(ga.data, h, w, k);
    const auto mu_b = filter_valid(gb.data, h, w, k);
    const auto e_aa = filter_valid(aa, h, w, k);
    const auto e_bb = filter_valid(bb, h, w, k);
    const auto e_ab = filter_valid(ab, h, w, k);

    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma2 = mu_a[i] * mu_a[i], mb2 = mu_b[i] * mu_b[i], mab = mu_a[i] * mu_b[i];
        const double va = e_aa[i] - ma2, vb = e_bb[i] - mb2, cov = e_ab[i] - mab;
        total += ((2.0 * mab + kC1) * (2.0 * cov + kC2)) / ((ma2 + mb2 + kC1) * (va + vb + kC2));
    }
    return total / static_cast<double>(mu_a.size());
}

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    require(a.size() > 0, "psnr: empty images");
    const double sse = simd::active().sq_diff_sum_f64(a.size(), a.data.data(), b.data.data());
    if (sse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(static_cast<double>(a.size()) / sse);
}

nlohmann::json json_number(double v) {
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    if (std::isnan(v)) return nullptr;
    return v;
}

double json_to_number(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "Inf") return std::numeric_limits<double>::infinity();
        if (s == "-Inf") return -std::numeric_limits<double>::infinity();
        fail(ErrorKind::parse_error, "expected a number, got '" + s + "'");
    }
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.get<double>();
}

nlohmann::json QualityResult::to_json(const std::string& method) const {
    nlohmann::json j = {{"ssim", ssim}, {"psnr_db", json_number(psnr_db)}, {"n_pairs", n_pairs}};
    if (!method.empty()) j["method"] = method;
    return j;
}

QualityResult evaluate_quality(const std::vector<Image>& generated, const std::vector<Image>& reference) {
    require(generated.size() == reference.size(), "evaluate_quality: set sizes differ");
    require(!generated.empty(), "evaluate_quality: empty sets");
    QualityResult q;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        const Image a = to_unit_range(generated[i]);
        const Image b = to_unit_range(reference[i]);
        q.ssim += ssim(a, b);
        q.psnr_db += psnr(a, b);
    }
    q.n_pairs = static_cast<int>(generated.size());
    q.ssim /= q.n_pairs;
    q.psnr_db /= q.n_pairs;
    return q;
}

std::vector<double> descending_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

MethodRanking quality_rank(const std::map<std::string, QualityResult>& methods) {
    if (methods.size() < 2) fail(ErrorKind::invalid_argument, "quality_rank: need at least 2 methods");
    std::vector<RankEntry> entries;
    std::vector<double> s, p;
    for (const auto& [name, q] : methods) {
        require(!std::isnan(q.ssim) && !std::isnan(q.psnr_db), "quality_rank: NaN metric for '" + name + "'");
        entries.push_back({name, q.ssim, q.psnr_db});
        s.push_back(q.ssim);
        p.push_back(q.psnr_db);
    }
    const auto sr = descending_ranks(s), pr = descending_ranks(p);
    std::vector<double> composite(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        entries[i].ssim_rank = sr[i];
        entries[i].psnr_rank = pr[i];
        entries[i].composite = 0.6 * sr[i] + 0.4 * pr[i];
        composite[i] = -entries[i].composite;
    }
    const auto fr = descending_ranks(composite);
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].rank = fr[i];
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RankEntry& a, const RankEntry& b) { return a.composite < b.composite; });
    return MethodRanking{std::move(entries)};
}

const RankEntry& MethodRanking::at(const std::string& method) const {
    for (const auto& e : entries)
        if (e.method == method) return e;
    fail(ErrorKind::invalid_argument, "no ranking entry for method '" + method + "'");
}

nlohmann::json MethodRanking::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries)
        arr.push_back({{"method", e.method},
                       {"ssim", e.ssim},
                       {"psnr_db", json_number(e.psnr_db)},
                       {"ssim_rank", e.ssim_rank},
                       {"psnr_rank", e.psnr_rank},
                       {"composite", e.composite},
                       {"rank", e.rank}});
    return arr;
}

std::string MethodRanking::to_markdown() const {
    std::ostringstream os;
    os << "| Method | SSIM | PSNR (dB) | SSIM rank | PSNR rank | Composite | Rank |\n";
    os << "|---|---|---|---|---|---|---|\n";
    os.setf(std::ios::fixed);
    for (const auto& e : entries) {
        os.precision(4);
        os << "| " << e.method << " | " << e.ssim << " | ";
        if (std::isinf(e.psnr_db)) os << "Inf";
        else os << e.psnr_db;
        os.precision(2);
        os << " | " << e.ssim_rank << " | " << e.psnr_rank << " | " << e.composite << " | " << e.rank << " |\n";
    }
    return os.str();
}

} // namespace vstain
