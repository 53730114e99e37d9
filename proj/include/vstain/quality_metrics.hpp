#pragma once

#include "vstain/image.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace vstain {

// Both metrics take images in unit range [0, 1]. RGB inputs are compared on
// BT.601 luminance; single-channel inputs are used as is.

// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// dynamic range 1, over the valid window positions.
double ssim(const Image& a, const Image& b);

// 10 log10(1 / MSE); +infinity when the images are identical.
double psnr(const Image& a, const Image& b);

struct QualityResult {
    double ssim = 0.0;
    double psnr_db = 0.0;
    int n_pairs = 0;

    nlohmann::json to_json(const std::string& method = {}) const;
};

// Per-pair metrics averaged over a set of (generated, reference) pairs, both
// given in model range [-1, 1].
QualityResult evaluate_quality(const std::vector<Image>& generated, const std::vector<Image>& reference);

struct RankEntry {
    std::string method;
    double ssim = 0.0;
    double psnr_db = 0.0;
    double ssim_rank = 0.0;
    double psnr_rank = 0.0;
    double composite = 0.0;
    double rank = 0.0;
};

// Entries ordered by ascending composite (best first).
struct MethodRanking {
    std::vector<RankEntry> entries;

    const RankEntry& at(const std::string& method) const;
    nlohmann::json to_json() const;
    std::string to_markdown() const;
};

// 1-based ranks, larger value = better = rank 1; ties share the mean rank.
std::vector<double> descending_ranks(const std::vector<double>& values);

// composite = 0.6 * SSIM rank + 0.4 * PSNR rank.
MethodRanking quality_rank(const std::map<std::string, QualityResult>& methods);

// JSON number, or the string "Inf" for +infinity.
nlohmann::json json_number(double v);
double json_to_number(const nlohmann::json& j);

} // namespace vstain
