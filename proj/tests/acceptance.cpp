// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
// Desk scale: 32x32 synthetic patches, 200 training pairs, 60 held-out pairs,
// T = 20, UNet width 16, 40 denoiser epochs, 24 classifier epochs.

#include "vstain/dataio.hpp"
#include "vstain/denoiser.hpp"
#include "vstain/diffusion.hpp"
#include "vstain/perturb.hpp"
#include "vstain/quality_metrics.hpp"
#include "vstain/rng.hpp"
#include "vstain/saliency.hpp"
#include "vstain/schedules.hpp"
#include "vstain/sfs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

using namespace vstain;
using clk = std::chrono::steady_clock;

namespace {

constexpr int kSize = 32;
constexpr int kTrainPairs = 200;
constexpr int kTestPairs = 60;
constexpr int kT = 20;
constexpr int kDenoiserEpochs = 40;

int failures = 0;

double seconds_since(clk::time_point t0) { return std::chrono::duration<double>(clk::now() - t0).count(); }

void report(int id, bool pass, const std::string& detail) {
    std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

class OraclePredictor : public Predictor {
public:
    OraclePredictor(Image r, Image eps) : r_(std::move(r)), eps_(std::move(eps)) {}
    Prediction predict(const Image&, int, const Image&) const override { return {r_, eps_}; }

private:
    Image r_, eps_;
};

Image uniform_image(Rng& rng, int c, int h, int w, double lo, double hi) {
    Image img(c, h, w);
    for (double& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

Image normal_image(Rng& rng, int c, int h, int w) {
    Image img(c, h, w);
    for (double& v : img.data) v = rng.normal();
    return img;
}

std::vector<SchedulePair> all_shapes(int T) {
    std::vector<SchedulePair> out;
    for (auto n : {NoiseShape::linear, NoiseShape::cosine})
        for (auto r : {RestorationShape::linear, RestorationShape::quadratic}) out.push_back(make_schedule(T, n, r));
    return out;
}

void criterion_oracle_inversion() {
    const auto t0 = clk::now();
    Rng rng(101);
    double worst = 0.0;
    int runs = 0;
    for (int T : {1, 10, 100})
        for (const auto& s : all_shapes(T))
            for (int k = 0; k < 50; ++k) {
                const Image x0 = uniform_image(rng, 3, 16, 16, -1, 1);
                const Image he = uniform_image(rng, 3, 16, 16, -1, 1);
                const ResidualImage r = residual(x0, he);
                const Image eps = normal_image(rng, 3, 16, 16);
                DiffusionSample st = forward_sample(x0, r, s, T, eps);
                while (st.t > 0) st = reverse_step(st, r.r, eps, s);
                worst = std::max(worst, max_abs_diff(st.x_t, x0));
                ++runs;
            }
    const double secs = seconds_since(t0);
    report(1, worst <= 1e-5 && secs < 10.0,
           fmt("oracle inversion: %d trajectories, max |x0_hat - x0| = %.3g (<= 1e-5), %.2fs (< 10s)", runs, worst, secs));
}

void criterion_ddpm_reduction() {
    Rng rng(202);
    bool identical = true;
    for (auto n : {NoiseShape::linear, NoiseShape::cosine}) {
        ScheduleOptions o;
        o.noise_shape = n;
        o.restoration_amplitude = 0.0;
        const auto s = make_schedule(kT, o);
        const Image he = uniform_image(rng, 3, 16, 16, -1, 1);
        const Image eps = normal_image(rng, 3, 16, 16);
        const OraclePredictor a(uniform_image(rng, 3, 16, 16, -1, 1), eps);
        const OraclePredictor b(uniform_image(rng, 3, 16, 16, -1, 1), eps);
        identical = identical && sample_ihc(he, a, s, PathMask::both(), 7) == sample_ihc(he, b, s, PathMask::both(), 7);
    }
    report(2, identical, "DDPM reduction: beta_bar = 0 gives bit-identical samples for two different residuals");
}

void criterion_telescoping() {
    double worst = 0.0;
    bool pass = true;
    for (int T : {1, 10, 20, 100, 1000})
        for (const auto& s : all_shapes(T)) {
            double sg = 0.0, se = 0.0;
            for (double g : s.gamma) sg += g;
            for (double e : s.eta) se += e;
            const double err = std::max(std::abs(sg - s.beta_bar[static_cast<std::size_t>(T)]),
                                        std::abs(se - s.alpha_bar[static_cast<std::size_t>(T)]));
            worst = std::max(worst, err);
            pass = pass && err <= 4.0 * T * std::numeric_limits<double>::epsilon();
        }
    report(3, pass, fmt("telescoping: max |sum gamma - beta_bar_T|, |sum eta - alpha_bar_T| = %.3g (<= 4 T eps)", worst));
}

void criterion_identity_calibration() {
    // 87 of 100 correct, as in the identical-pair baseline
    std::vector<int> truth(100), preds(100);
    for (int i = 0; i < 100; ++i) {
        truth[static_cast<std::size_t>(i)] = i % 2;
        preds[static_cast<std::size_t>(i)] = i < 13 ? 1 - i % 2 : i % 2;
    }
    const auto base = compute_sfs(preds, preds, truth);
    bool pass = base.sfs == (base.acc_real + 1.0) / 2.0 && std::abs(base.sfs - 0.935) < 1e-12;
    Rng rng(303);
    for (int k = 0; k < 200; ++k) {
        const int classes = 2 + static_cast<int>(rng.below(3));
        const int n = 1 + static_cast<int>(rng.below(80));
        std::vector<int> t(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            t[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
            p[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
        }
        const auto rep = compute_sfs(p, p, t, classes);
        pass = pass && rep.sfs == (rep.acc_real + 1.0) / 2.0;
    }
    report(4, pass, fmt("SFS identity: SFS(real, real) = (acc + 1) / 2 exactly on 200 random sets; acc 0.87 -> %.4f", base.sfs));
}

// Independent SFS from per-class count tables.
double sfs_from_tables(const std::vector<std::vector<int>>& real, const std::vector<std::vector<int>>& gen) {
    const std::size_t classes = real.size();
    long total = 0, correct_gen = 0;
    double deg = 0.0;
    int included = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        long n = 0;
        for (int v : real[c]) n += v;
        total += n;
        correct_gen += gen[c][c];
        if (n == 0) continue;
        deg += static_cast<double>(real[c][c]) / static_cast<double>(n) - static_cast<double>(gen[c][c]) / static_cast<double>(n);
        ++included;
    }
    const double acc = static_cast<double>(correct_gen) / static_cast<double>(total);
    return std::clamp((acc + (1.0 - deg / included)) / 2.0, 0.0, 1.0);
}

void criterion_sfs_oracle() {
    Rng rng(404);
    int mismatches = 0;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const int classes = 2 + static_cast<int>(rng.below(3));
        std::vector<std::vector<int>> real(static_cast<std::size_t>(classes), std::vector<int>(static_cast<std::size_t>(classes), 0));
        std::vector<std::vector<int>> gen = real;
        std::vector<int> truth, rp, gp;
        for (int c = 0; c < classes; ++c) {
            const int n = static_cast<int>(rng.below(21));
            for (int i = 0; i < n; ++i) {
                const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
                const int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
                ++real[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)];
                ++gen[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)];
                truth.push_back(c);
                rp.push_back(a);
                gp.push_back(b);
            }
        }
        if (truth.empty()) {
            --k;
            continue;
        }
        // interleave items so the implementation sees an arbitrary order
        std::vector<std::size_t> order(truth.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order.begin(), order.end());
        std::vector<int> t2, r2, g2;
        for (auto i : order) {
            t2.push_back(truth[i]);
            r2.push_back(rp[i]);
            g2.push_back(gp[i]);
        }
        const double got = compute_sfs(r2, g2, t2, classes).sfs;
        const double want = sfs_from_tables(real, gen);
        worst = std::max(worst, std::abs(got - want));
        mismatches += got != want;
    }
    report(5, mismatches == 0, fmt("SFS brute force: %d of 1000 random confusion tables differ (max |diff| %.3g)", mismatches, worst));
}

struct Fixture {
    std::vector<PairedPatch> train, test;
    std::vector<Image> train_ihc, test_ihc, test_he;
    std::vector<int> train_labels, test_labels;
};

Fixture make_fixture() {
    Fixture f;
    f.train = synth_dataset(kTrainPairs, kSize, {0.25, 0.25, 0.25, 0.25}, 7);
    f.test = synth_dataset(kTestPairs, kSize, {0.25, 0.25, 0.25, 0.25}, 8);
    for (const auto& p : f.train) {
        f.train_ihc.push_back(p.ihc);
        f.train_labels.push_back(class_label(p, true));
    }
    for (const auto& p : f.test) {
        f.test_ihc.push_back(p.ihc);
        f.test_he.push_back(p.he);
        f.test_labels.push_back(class_label(p, true));
    }
    return f;
}

void criterion_perturbation(const Fixture& f, const Classifier& clf) {
    const auto t0 = clk::now();
    const PerturbationReport rep = run_battery(f.test_ihc, f.test_labels, clf);
    const double secs = seconds_since(t0);
    std::printf("%s", rep.to_markdown().c_str());
    const auto& tr = rep.row("translate 5px");
    const auto& el = rep.row("elastic high");
    const bool pass = tr.ssim_drop >= 30.0 && tr.sfs_drop <= 3.0 && el.accuracy_drop >= el.sfs_drop && secs < 120.0;
    report(6, pass,
           fmt("perturbation: translate 5px SSIM drop %.1f%% (>= 30) and SFS drop %.1f%% (<= 3); elastic high accuracy "
               "drop %.1f%% >= SFS drop %.1f%%; battery %.1fs (< 120s); properly-fit test accuracy %.3f",
               tr.ssim_drop, tr.sfs_drop, el.accuracy_drop, el.sfs_drop, secs, clf.stage.test_acc));
}

void criterion_stage_bias(const Fixture& f, const ClassifierTraining& ct, const std::vector<Image>& generated) {
    const StageRobustness sr = stage_robustness(generated, f.test_ihc, f.test_labels,
                                                {&ct.stages[0], &ct.stages[1], &ct.stages[2]});
    std::printf("%s", sr.to_markdown().c_str());
    report(7, sr.sfs_range < sr.accuracy_range,
           fmt("classifier bias: range(SFS) %.4f < range(accuracy) %.4f across underfit/properly-fit/overfit",
               sr.sfs_range, sr.accuracy_range));
}

void criterion_saliency(const DenoiserCheckpoint& model) {
    const auto t0 = clk::now();
    SynthOptions so;
    so.structure = SynthStructure::single_blob;
    SaliencyOptions opts;
    opts.seed = 1;
    double ratio_sum = 0.0;
    std::string per_patch;
    bool deterministic = true;
    const int patches = 4;
    for (int k = 0; k < patches; ++k) {
        const SynthPatch sp = synth_patch("blob", kSize, k, 50 + static_cast<std::uint64_t>(k), so);
        const SaliencyMap sm = rise_saliency(sp.patch.he, model.pair, model.schedule, opts);
        if (k == 0) {
            const SaliencyMap again = rise_saliency(sp.patch.he, model.pair, model.schedule, opts);
            for (std::size_t i = 0; i < sm.maps.size(); ++i) deterministic = deterministic && sm.maps[i] == again.maps[i];
        }
        // the reverse chain runs T -> 1, so the last probed step is the smallest t
        const Image& m = sm.maps.back();
        double in = 0.0, out = 0.0;
        int ni = 0, no = 0;
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (sp.tissue_mask.data[j] > 0.5) {
                in += m.data[j];
                ++ni;
            } else {
                out += m.data[j];
                ++no;
            }
        }
        const double ratio = (in / ni) / (out / no);
        ratio_sum += ratio;
        per_patch += fmt("%s%.3f", k ? ", " : "", ratio);
    }
    const double mean_ratio = ratio_sum / patches;
    report(9, mean_ratio >= 1.5 && deterministic,
           fmt("saliency: inside/outside blob at t = 1 (final probed step), mean over %d patches %.3f (>= 1.5) [%s], "
               "N = %d masks; deterministic: %s; %.1fs",
               patches, mean_ratio, per_patch.c_str(), opts.n_masks, deterministic ? "yes" : "no", seconds_since(t0)));
}

void criterion_metric_units() {
    Rng rng(505);
    const Image x = uniform_image(rng, 3, 32, 32, 0, 1);
    const double s = ssim(x, x), p = psnr(x, x);
    auto q = [](double psnr_db, double ss) {
        QualityResult r;
        r.psnr_db = psnr_db;
        r.ssim = ss;
        r.n_pairs = 1;
        return r;
    };
    const std::map<std::string, QualityResult> table{
        {"Reinhard", q(15.34, 0.44)}, {"Macenko", q(15.49, 0.41)},         {"Vahadane", q(15.04, 0.35)},
        {"CycleGAN", q(16.20, 0.37)}, {"Pix2Pix", q(19.63, 0.42)},         {"Pix2Pix-Pyramid", q(21.61, 0.48)},
        {"Palette", q(17.13, 0.53)},  {"PST-Diff", q(16.75, 0.38)},        {"dual-path", q(21.30, 0.53)},
    };
    const MethodRanking rk = quality_rank(table);
    const bool pass = s == 1.0 && std::isinf(p) && p > 0 && rk.entries.front().method == "dual-path" &&
                      rk.at("dual-path").rank == 1.0;
    report(10, pass,
           fmt("metric units: SSIM(x,x) = %.17g, PSNR(x,x) = %s, benchmark table ranks %s first (composite %.2f)", s,
               std::isinf(p) ? "+Inf" : "finite", rk.entries.front().method.c_str(), rk.entries.front().composite));
}

} // namespace

int main() {
    const auto start = clk::now();
    criterion_oracle_inversion();
    criterion_ddpm_reduction();
    criterion_telescoping();
    criterion_identity_calibration();
    criterion_sfs_oracle();

    const Fixture f = make_fixture();

    auto t0 = clk::now();
    ClassifierConfig cc;
    cc.seed = 1;
    const ClassifierTraining ct = train_classifier(f.train_ihc, f.train_labels, f.test_ihc, f.test_labels, cc);
    std::printf("classifier: %d epochs in %.1fs; stages", cc.epochs, seconds_since(t0));
    for (const auto& c : ct.stages)
        std::printf(" %s@%d test %.3f", std::string(to_string(c.stage.stage)).c_str(), c.stage.epoch, c.stage.test_acc);
    std::printf("\n");
    const Classifier& proper = ct.stage(FitStage::properly_fit);
    criterion_perturbation(f, proper);

    t0 = clk::now();
    TrainConfig tc;
    tc.epochs = kDenoiserEpochs;
    tc.T = kT;
    tc.seed = 3;
    const TrainResult tr = train_denoiser(f.train, tc, {}, {}, Orientation::he_minus_ihc);
    const double train_secs = seconds_since(t0);
    std::printf("denoiser: %d epochs in %.1fs, loss %.4f -> %.4f\n", tc.epochs, train_secs, tr.log.initial_loss,
                tr.log.epochs.back().loss);

    const char* names[3] = {"dual-path", "restoration-only", "noise-only"};
    const PathMask masks[3] = {PathMask::both(), PathMask::restoration_only(), PathMask::noise_only()};
    std::vector<Image> generated[3];
    double ssims[3], sfss[3];
    const auto real_preds = proper.predict(f.test_ihc);
    for (int m = 0; m < 3; ++m) {
        for (std::size_t i = 0; i < f.test.size(); ++i)
            generated[m].push_back(sample_ihc(f.test_he[i], tr.model.pair, tr.model.schedule, masks[m], 100 + i));
        const QualityResult qr = evaluate_quality(generated[m], f.test_ihc);
        const SFSReport sr = compute_sfs(real_preds, proper.predict(generated[m]), f.test_labels);
        ssims[m] = qr.ssim;
        sfss[m] = sr.sfs;
        std::printf("  %-16s SSIM %.4f  PSNR %.2f  accuracy %.3f  SFS %.4f\n", names[m], qr.ssim, qr.psnr_db, sr.acc_gen, sr.sfs);
    }
    criterion_stage_bias(f, ct, generated[0]);

    const bool ordered = ssims[0] > ssims[1] && ssims[0] > ssims[2] && sfss[0] > sfss[1] && sfss[0] > sfss[2];
    report(8, ordered && train_secs < 900.0,
           fmt("ablation: dual-path SSIM %.4f > {%.4f, %.4f} and SFS %.4f > {%.4f, %.4f}; training %.0fs (< 900s)",
               ssims[0], ssims[1], ssims[2], sfss[0], sfss[1], sfss[2], train_secs));

    criterion_saliency(tr.model);
    criterion_metric_units();

    std::printf("total %.0fs, %d criteria failed\n", seconds_since(start), failures);
    return failures == 0 ? 0 : 1;
}
