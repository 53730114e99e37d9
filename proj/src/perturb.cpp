#include "vstain/perturb.hpp"

#include "vstain/errors.hpp"
#include "vstain/imgproc.hpp"
#include "vstain/quality_metrics.hpp"
#include "vstain/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace vstain {

std::string_view to_string(PerturbKind k) noexcept {
    switch (k) {
    case PerturbKind::translate: return "translate";
    case PerturbKind::rotate: return "rotate";
    case PerturbKind::elastic: return "elastic";
    }
    return "?";
}

std::string_view to_string(ElasticSeverity s) noexcept {
    switch (s) {
    case ElasticSeverity::low: return "low";
    case ElasticSeverity::medium: return "medium";
    case ElasticSeverity::high: return "high";
    }
    return "?";
}

ElasticSeverity parse_elastic_severity(std::string_view s) {
    if (s == "low") return ElasticSeverity::low;
    if (s == "medium") return ElasticSeverity::medium;
    if (s == "high") return ElasticSeverity::high;
    fail(ErrorKind::parse_error, "unknown elastic severity '" + std::string(s) + "'");
}

double elastic_amplitude(ElasticSeverity s) noexcept {
    switch (s) {
    case ElasticSeverity::low: return 2.0;
    case ElasticSeverity::medium: return 6.0;
    case ElasticSeverity::high: return 12.0;
    }
    return 0.0;
}

std::string Perturbation::label() const {
    std::ostringstream os;
    switch (kind) {
    case PerturbKind::translate: os << "translate " << magnitude << "px"; break;
    case PerturbKind::rotate: os << "rotate " << magnitude << "deg"; break;
    case PerturbKind::elastic:
        os << "elastic ";
        for (auto s : {ElasticSeverity::low, ElasticSeverity::medium, ElasticSeverity::high})
            if (elastic_amplitude(s) == magnitude) {
                os << to_string(s);
                return os.str();
            }
        os << magnitude << "px";
        break;
    }
    return os.str();
}

void Perturbation::validate() const {
    if (!(magnitude >= 0.0) || !std::isfinite(magnitude))
        fail(ErrorKind::invalid_argument, "perturbation magnitude must be finite and >= 0");
    if (kind == PerturbKind::elastic && magnitude != 0.0) {
        bool known = false;
        for (auto s : {ElasticSeverity::low, ElasticSeverity::medium, ElasticSeverity::high})
            known = known || elastic_amplitude(s) == magnitude;
        if (!known) fail(ErrorKind::invalid_argument, "elastic magnitude must be one of the low/medium/high amplitudes");
    }
}

namespace {

Image warp(const Image& img, const std::vector<double>& dy, const std::vector<double>& dx) {
    Image out(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
                out.at(c, y, x) = sample_bilinear(img, c, y + dy[i], x + dx[i]);
            }
    return out;
}

std::vector<double> smooth_field(int h, int w, Rng& rng) {
    Image f(1, h, w);
    for (double& v : f.data) v = rng.normal();
    f = gaussian_blur(f, kElasticSigma);
    double m = 0.0;
    for (double v : f.data) m = std::max(m, std::abs(v));
    if (m > 0.0)
        for (double& v : f.data) v /= m;
    return f.data;
}

} // namespace

Image apply(const Image& img, const Perturbation& p) {
    p.validate();
    const double half = 0.5 * std::min(img.height, img.width);
    if (p.kind != PerturbKind::rotate && p.magnitude > half)
        fail(ErrorKind::invalid_argument, "perturbation magnitude " + std::to_string(p.magnitude) +
                                              " exceeds half the image size");
    const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
    std::vector<double> dy(n), dx(n);
    switch (p.kind) {
    case PerturbKind::translate:
        std::fill(dy.begin(), dy.end(), -p.magnitude);
        std::fill(dx.begin(), dx.end(), -p.magnitude);
        break;
    case PerturbKind::rotate: {
        const double a = p.magnitude * std::numbers::pi / 180.0;
        const double ca = std::cos(a), sa = std::sin(a);
        const double cy = 0.5 * (img.height - 1), cx = 0.5 * (img.width - 1);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                // inverse map: source = R(-a) * (dest - center) + center
                const double ry = y - cy, rx = x - cx;
                const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
                dy[i] = (ca * ry - sa * rx) - ry;
                dx[i] = (sa * ry + ca * rx) - rx;
            }
        break;
    }
    case PerturbKind::elastic: {
        if (p.magnitude == 0.0) break;
        Rng rng(mix_seed(p.seed, 31));
        dy = smooth_field(img.height, img.width, rng);
        dx = smooth_field(img.height, img.width, rng);
        for (std::size_t i = 0; i < n; ++i) {
            dy[i] *= p.magnitude;
            dx[i] *= p.magnitude;
        }
        break;
    }
    }
    return warp(img, dy, dx);
}

double percent_drop(double baseline, double value) noexcept {
    if (std::isinf(baseline) || baseline == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (baseline - value) / baseline * 100.0;
}

const PerturbationRow& PerturbationReport::row(const std::string& name) const {
    for (const auto& r : rows)
        if (r.name == name) return r;
    fail(ErrorKind::invalid_argument, "no perturbation row named '" + name + "'");
}

PerturbationReport run_battery(const std::vector<Image>& ihc, const std::vector<int>& labels, const Classifier& clf,
                               const BatteryConfig& cfg) {
    if (!clf.trained()) fail(ErrorKind::invalid_state, "perturbation battery needs a trained classifier");
    require(!ihc.empty(), "run_battery: empty image set");
    require(ihc.size() == labels.size(), "run_battery: image and label counts differ");

    std::vector<Perturbation> battery;
    for (double m : cfg.translations) battery.push_back(Perturbation::translate(m));
    for (double m : cfg.rotations) battery.push_back(Perturbation::rotate(m));
    for (auto s : cfg.elastic) battery.push_back(Perturbation::elastic(s, cfg.seed));

    const auto real_preds = clf.predict(ihc);
    PerturbationReport rep;
    {
        const QualityResult q = evaluate_quality(ihc, ihc);
        const SFSReport s = compute_sfs(real_preds, real_preds, labels, clf.classes());
        rep.rows.push_back({"identical pair", q.ssim, q.psnr_db, s.acc_gen, s.sfs});
    }
    const PerturbationRow& base = rep.rows.front();
    for (std::size_t k = 0; k < battery.size(); ++k) {
        std::vector<Image> moved;
        moved.reserve(ihc.size());
        for (std::size_t i = 0; i < ihc.size(); ++i) {
            Perturbation p = battery[k];
            p.seed = mix_seed(cfg.seed, i);
            moved.push_back(apply(ihc[i], p));
        }
        const QualityResult q = evaluate_quality(moved, ihc);
        const SFSReport s = compute_sfs(real_preds, clf.predict(moved), labels, clf.classes());
        PerturbationRow r{battery[k].label(), q.ssim, q.psnr_db, s.acc_gen, s.sfs};
        r.ssim_drop = percent_drop(base.ssim, r.ssim);
        r.psnr_drop = percent_drop(base.psnr_db, r.psnr_db);
        r.accuracy_drop = percent_drop(base.accuracy, r.accuracy);
        r.sfs_drop = percent_drop(base.sfs, r.sfs);
        rep.rows.push_back(r);
    }
    return rep;
}

nlohmann::json PerturbationReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"perturbation", r.name},
                       {"ssim", r.ssim},
                       {"psnr_db", json_number(r.psnr_db)},
                       {"accuracy", r.accuracy},
                       {"sfs", r.sfs},
                       {"ssim_drop_pct", json_number(r.ssim_drop)},
                       {"psnr_drop_pct", json_number(r.psnr_drop)},
                       {"accuracy_drop_pct", json_number(r.accuracy_drop)},
                       {"sfs_drop_pct", json_number(r.sfs_drop)}});
    return {{"rows", arr}};
}

std::string PerturbationReport::to_markdown() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    auto cell = [&](double v, double drop, bool first) {
        os.precision(2);
        if (std::isinf(v)) os << "Inf";
        else os << v;
        if (!first) {
            os.precision(1);
            if (std::isnan(drop)) os << " (-)";
            else os << " (" << drop << "%)";
        }
        os << " | ";
    };
    os << "| Perturbation | SSIM | PSNR (dB) | Accuracy | SFS |\n|---|---|---|---|---|\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        os << "| " << r.name << " | ";
        cell(r.ssim, r.ssim_drop, i == 0);
        cell(r.psnr_db, r.psnr_drop, i == 0);
        cell(r.accuracy, r.accuracy_drop, i == 0);
        cell(r.sfs, r.sfs_drop, i == 0);
        os << "\n";
    }
    return os.str();
}

} // namespace vstain
