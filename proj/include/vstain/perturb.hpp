#pragma once

#include "vstain/image.hpp"
#include "vstain/sfs.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vstain {

enum class PerturbKind { translate, rotate, elastic };
enum class ElasticSeverity { low, medium, high };

std::string_view to_string(PerturbKind k) noexcept;
std::string_view to_string(ElasticSeverity s) noexcept;
ElasticSeverity parse_elastic_severity(std::string_view s);

// Displacement amplitude in pixels for each severity level.
double elastic_amplitude(ElasticSeverity s) noexcept;
inline constexpr double kElasticSigma = 8.0;

struct Perturbation {
    PerturbKind kind = PerturbKind::translate;
    double magnitude = 0.0; // pixels (translate, elastic amplitude) or degrees (rotate)
    std::uint64_t seed = 0; // elastic field

    static Perturbation translate(double px) { return {PerturbKind::translate, px, 0}; }
    static Perturbation rotate(double degrees) { return {PerturbKind::rotate, degrees, 0}; }
    static Perturbation elastic(ElasticSeverity s, std::uint64_t seed) { return {PerturbKind::elastic, elastic_amplitude(s), seed}; }

    std::string label() const;
    void validate() const;
};

// Translate: diagonal shift by (magnitude, magnitude). Rotate: about the
// image center. Elastic: Gaussian-smoothed random displacement field scaled to
// the severity amplitude. Bilinear resampling with reflect padding throughout.
Image apply(const Image& img, const Perturbation& p);

struct BatteryConfig {
    std::vector<double> translations{5, 10, 15};
    std::vector<double> rotations{5, 10, 15};
    std::vector<ElasticSeverity> elastic{ElasticSeverity::low, ElasticSeverity::medium, ElasticSeverity::high};
    std::uint64_t seed = 0;
};

struct PerturbationRow {
    std::string name;
    double ssim = 0.0;
    double psnr_db = 0.0;
    double accuracy = 0.0;
    double sfs = 0.0;
    // Percent drops relative to the baseline row; psnr_drop is NaN when the
    // baseline PSNR is infinite.
    double ssim_drop = 0.0;
    double psnr_drop = 0.0;
    double accuracy_drop = 0.0;
    double sfs_drop = 0.0;
};

struct PerturbationReport {
    std::vector<PerturbationRow> rows; // rows[0] is the identical-pair baseline

    const PerturbationRow& row(const std::string& name) const;
    nlohmann::json to_json() const;
    std::string to_markdown() const;
};

double percent_drop(double baseline, double value) noexcept;

// Perturbs every IHC patch, then scores structure (SSIM/PSNR against the
// original) and semantics (accuracy and SFS with the original predictions as
// the real reference).
PerturbationReport run_battery(const std::vector<Image>& ihc, const std::vector<int>& labels, const Classifier& clf,
                               const BatteryConfig& cfg = {});

} // namespace vstain
