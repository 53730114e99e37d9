#include "support.hpp"

#include "vstain/sfs.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

using namespace vstain;

namespace {

// Labels with recall `r_c` inside each block of `n` items per class.
std::vector<int> preds_with_recalls(const std::vector<double>& recalls, int n, int classes) {
    std::vector<int> p;
    for (int c = 0; c < static_cast<int>(recalls.size()); ++c) {
        const int hit = static_cast<int>(std::lround(recalls[static_cast<std::size_t>(c)] * n));
        for (int i = 0; i < n; ++i) p.push_back(i < hit ? c : (c + 1) % classes);
    }
    return p;
}

std::vector<int> block_truth(int classes, int n) {
    std::vector<int> t;
    for (int c = 0; c < classes; ++c) t.insert(t.end(), static_cast<std::size_t>(n), c);
    return t;
}

Classifier tiny_classifier(std::uint64_t seed) {
    nn::ResNetConfig cfg;
    cfg.width = 2;
    cfg.classes = 2;
    Classifier c(cfg, true, seed);
    c.mark_trained();
    return c;
}

} // namespace

TEST_CASE("class recalls by hand") {
    const auto r = class_recalls({0, 1, 1, 1}, {0, 0, 1, 1}, 2);
    CHECK(r.recall == std::vector<double>{0.5, 1.0});
    CHECK(r.count == std::vector<int>{2, 2});
    const auto perfect = class_recalls({2, 0, 1}, {2, 0, 1}, 3);
    CHECK(perfect.recall == std::vector<double>{1.0, 1.0, 1.0});
    const auto absent = class_recalls({0, 0}, {0, 0}, 2);
    CHECK_FALSE(absent.present(1));
    CHECK(absent.recall[1] == 0.0);
    CHECK_ERROR_KIND(class_recalls({0}, {0, 1}, 2), ErrorKind::invalid_argument);
}

TEST_CASE("identity calibration gives (acc + 1) / 2") {
    // 87 of 100 correct on both sets
    std::vector<int> truth(100), preds(100);
    for (int i = 0; i < 100; ++i) {
        truth[static_cast<std::size_t>(i)] = i % 2;
        preds[static_cast<std::size_t>(i)] = i < 13 ? 1 - i % 2 : i % 2;
    }
    const auto rep = compute_sfs(preds, preds, truth);
    CHECK(rep.acc_gen == doctest::Approx(0.87));
    CHECK(rep.avg_deg == 0.0);
    CHECK(rep.sfs == doctest::Approx(0.935));
    CHECK(compute_sfs(truth, truth, truth).sfs == 1.0);
}

TEST_CASE("worked two-class example") {
    const auto truth = block_truth(2, 10);
    const auto real = preds_with_recalls({0.9, 0.8}, 10, 2);
    const auto gen = preds_with_recalls({0.7, 0.6}, 10, 2);
    const auto rep = compute_sfs(real, gen, truth);
    CHECK(rep.acc_gen == doctest::Approx(0.65));
    CHECK(rep.avg_deg == doctest::Approx(0.2));
    CHECK(rep.sfs == doctest::Approx(0.725));
    CHECK(rep.to_json()["sfs"].get<double>() == doctest::Approx(0.725));
}

TEST_CASE("sfs clamps and keeps the raw value") {
    // generated recalls above real recalls push the raw score past 1
    const auto truth = block_truth(2, 10);
    const auto real = preds_with_recalls({0.0, 0.0}, 10, 2);
    const auto rep = compute_sfs(real, truth, truth);
    CHECK(rep.sfs_raw == doctest::Approx(1.5));
    CHECK(rep.sfs == 1.0);
    CHECK_ERROR_KIND(compute_sfs({0}, {0, 1}, {0, 1}), ErrorKind::invalid_argument);
}

TEST_CASE("empty classes are excluded from the degradation mean") {
    const std::vector<int> truth{0, 0, 0, 0};
    const auto rep = compute_sfs({0, 0, 0, 0}, {0, 0, 1, 1}, truth, 3);
    CHECK(rep.included == std::vector<bool>{true, false, false});
    CHECK(rep.avg_deg == doctest::Approx(0.5));
    CHECK(rep.sfs == doctest::Approx((0.5 + 1 - 0.5) / 2));
}

TEST_CASE("sfs is permutation invariant, bounded and monotone") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 30;
        std::vector<int> truth(n), real(n), gen(n);
        for (int i = 0; i < n; ++i) {
            truth[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(3));
            real[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(3));
            gen[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(3));
        }
        const double s = compute_sfs(real, gen, truth, 3).sfs;
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order.begin(), order.end());
        std::vector<int> t2, r2, g2;
        for (auto k : order) {
            t2.push_back(truth[k]);
            r2.push_back(real[k]);
            g2.push_back(gen[k]);
        }
        CHECK(compute_sfs(r2, g2, t2, 3).sfs == s);

        for (int i = 0; i < n; ++i) {
            if (gen[static_cast<std::size_t>(i)] == truth[static_cast<std::size_t>(i)]) continue;
            auto fixed = gen;
            fixed[static_cast<std::size_t>(i)] = truth[static_cast<std::size_t>(i)];
            CHECK(compute_sfs(real, fixed, truth, 3).sfs >= s);
            break;
        }
    }
}

TEST_CASE("fit stage names") {
    for (auto s : {FitStage::underfit, FitStage::properly_fit, FitStage::overfit})
        CHECK(parse_fit_stage(to_string(s)) == s);
    CHECK_ERROR_KIND(parse_fit_stage("late"), ErrorKind::parse_error);
}

TEST_CASE("classifier config stage epochs") {
    ClassifierConfig cfg;
    cfg.epochs = 24;
    CHECK(cfg.resolved_stage_epochs() == std::array<int, 3>{8, 16, 24});
    cfg.stage_epochs = {2, 5, 9};
    CHECK(cfg.resolved_stage_epochs() == std::array<int, 3>{2, 5, 9});
    CHECK(ClassifierConfig::from_json(cfg.to_json()).resolved_stage_epochs() == cfg.resolved_stage_epochs());
    cfg.stage_epochs = {5, 2, 9};
    CHECK_ERROR_KIND(cfg.validate(), ErrorKind::invalid_argument);
}

TEST_CASE("stage robustness identities and errors") {
    const auto imgs = synth_dataset(12, 16, {0.5, 0.0, 0.0, 0.5}, 2);
    std::vector<Image> ihc;
    std::vector<int> truth;
    for (const auto& p : imgs) {
        ihc.push_back(p.ihc);
        truth.push_back(class_label(p, true));
    }
    const Classifier a = tiny_classifier(1), b = tiny_classifier(2);
    const auto rob = stage_robustness(ihc, ihc, truth, {&a, &b});
    REQUIRE(rob.rows.size() == 2);
    for (const auto& row : rob.rows) CHECK(row.sfs == doctest::Approx((row.accuracy + 1) / 2).epsilon(1e-12));
    CHECK(rob.sfs_range == doctest::Approx(rob.accuracy_range / 2));

    const auto single = stage_robustness(ihc, ihc, truth, {&a});
    CHECK(single.rows.size() == 1);
    CHECK(single.accuracy_range == 0.0);
    CHECK(single.sfs_range == 0.0);

    CHECK_ERROR_KIND(stage_robustness(ihc, ihc, truth, {}), ErrorKind::invalid_state);
    Classifier untrained = tiny_classifier(3);
    untrained.mark_trained(false);
    CHECK_ERROR_KIND(stage_robustness(ihc, ihc, truth, {&a, &untrained}), ErrorKind::invalid_state);
    CHECK_ERROR_KIND(stage_robustness(ihc, ihc, truth, {&a, nullptr}), ErrorKind::invalid_state);
}

TEST_CASE("classifier training is deterministic and rejects one class") {
    const auto data = synth_dataset(24, 16, {0.5, 0.0, 0.0, 0.5}, 5);
    std::vector<Image> x;
    std::vector<int> y;
    for (const auto& p : data) {
        x.push_back(p.ihc);
        y.push_back(class_label(p, true));
    }
    ClassifierConfig cfg;
    cfg.epochs = 4;
    cfg.width = 4;
    cfg.learning_rate = 1e-2;
    cfg.underfit_gap = 0.0;
    cfg.stage_epochs = {1, 3, 4};
    cfg.seed = 7;
    const auto a = train_classifier(x, y, x, y, cfg);
    const auto b = train_classifier(x, y, x, y, cfg);
    REQUIRE(a.curve.size() == 5);
    CHECK(a.curve.front().epoch == 0);
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].train_loss == b.curve[i].train_loss);
        CHECK(a.curve[i].test_acc == b.curve[i].test_acc);
    }
    CHECK(a.curve_csv() == b.curve_csv());
    for (const auto& s : a.stages) CHECK(s.trained());
    CHECK(a.stage(FitStage::underfit).stage.test_acc < a.stage(FitStage::properly_fit).stage.test_acc);

    const auto dir = test::temp_dir("sfs_ckpt");
    save_classifier(dir / "c.vsta", a.stages[1]);
    const Classifier back = load_classifier(dir / "c.vsta");
    CHECK(back.predict(x) == a.stages[1].predict(x));
    CHECK(back.stage.epoch == a.stages[1].stage.epoch);

    std::vector<int> one(y.size(), 1);
    CHECK_ERROR_KIND(train_classifier(x, one, x, one, cfg), ErrorKind::invalid_argument);
}

TEST_CASE("loading a non-classifier archive is a version error") {
    const auto dir = test::temp_dir("sfs_bad");
    {
        std::ofstream f(dir / "x.vsta", std::ios::binary);
        f << "not an archive";
    }
    bool threw = false;
    try {
        (void)load_classifier(dir / "x.vsta");
    } catch (const Error& e) {
        threw = true;
        CHECK((e.kind() == ErrorKind::version_error || e.kind() == ErrorKind::parse_error));
    }
    CHECK(threw);
}
