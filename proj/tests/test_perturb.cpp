#include "support.hpp"

#include "vstain/perturb.hpp"
#include "vstain/quality_metrics.hpp"

#include <cmath>

using namespace vstain;

TEST_CASE("zero-magnitude perturbations are the identity") {
    const Image img = test::random_image(3, 20, 20, 1);
    CHECK(apply(img, Perturbation::translate(0)) == img);
    CHECK(max_abs_diff(apply(img, Perturbation::rotate(0)), img) < 1e-12);
    CHECK(max_abs_diff(apply(img, Perturbation::rotate(360)), img) < 1e-9);
}

TEST_CASE("translation shifts diagonally") {
    const Image img = test::random_image(1, 16, 16, 2);
    const Image out = apply(img, Perturbation::translate(3));
    for (int y = 3; y < 16; ++y)
        for (int x = 3; x < 16; ++x) CHECK(out.at(0, y, x) == img.at(0, y - 3, x - 3));
}

TEST_CASE("rotation by 90 degrees permutes pixels") {
    const Image img = test::random_image(1, 9, 9, 3);
    const Image out = apply(img, Perturbation::rotate(90));
    // center is fixed and the four quarter turns return the original
    CHECK(out.at(0, 4, 4) == doctest::Approx(img.at(0, 4, 4)));
    Image back = out;
    for (int i = 0; i < 3; ++i) back = apply(back, Perturbation::rotate(90));
    CHECK(max_abs_diff(back, img) < 1e-9);
}

TEST_CASE("elastic fields are seeded and bounded") {
    const Image img = test::random_image(3, 32, 32, 4);
    const auto p = Perturbation::elastic(ElasticSeverity::medium, 9);
    CHECK(apply(img, p) == apply(img, p));
    CHECK_FALSE(apply(img, p) == apply(img, Perturbation::elastic(ElasticSeverity::medium, 10)));
    const Image out = apply(img, p);
    CHECK(out.same_shape(img));
    for (double v : out.data) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    CHECK(elastic_amplitude(ElasticSeverity::low) < elastic_amplitude(ElasticSeverity::medium));
    CHECK(elastic_amplitude(ElasticSeverity::medium) < elastic_amplitude(ElasticSeverity::high));
    CHECK(parse_elastic_severity("high") == ElasticSeverity::high);
    CHECK_ERROR_KIND(parse_elastic_severity("extreme"), ErrorKind::parse_error);
}

TEST_CASE("shapes are preserved") {
    const Image img = test::random_image(3, 32, 40, 5);
    for (const auto& p : {Perturbation::translate(4), Perturbation::rotate(15),
                          Perturbation::elastic(ElasticSeverity::high, 1)})
        CHECK(apply(img, p).same_shape(img));
}

TEST_CASE("magnitude errors") {
    const Image img = test::random_image(3, 16, 16, 6);
    CHECK_ERROR_KIND(apply(img, Perturbation::translate(9)), ErrorKind::invalid_argument);
    CHECK_ERROR_KIND(apply(img, Perturbation::translate(-1)), ErrorKind::invalid_argument);
    CHECK_ERROR_KIND(apply(img, Perturbation::elastic(ElasticSeverity::high, 1)), ErrorKind::invalid_argument);
    CHECK_NOTHROW(apply(img, Perturbation::rotate(45)));
    CHECK_ERROR_KIND(apply(img, Perturbation{PerturbKind::elastic, 3.0, 0}), ErrorKind::invalid_argument);
}

TEST_CASE("labels and percent drops") {
    CHECK(Perturbation::translate(5).label() == "translate 5px");
    CHECK(Perturbation::rotate(10).label() == "rotate 10deg");
    CHECK(Perturbation::elastic(ElasticSeverity::high, 0).label() == "elastic high");
    CHECK(percent_drop(0.5, 0.25) == doctest::Approx(50.0));
    CHECK(percent_drop(1.0, 1.02) == doctest::Approx(-2.0));
    CHECK(std::isnan(percent_drop(INFINITY, 20.0)));
}

TEST_CASE("translation SSIM does not increase with the shift") {
    const auto data = synth_dataset(6, 32, {0.25, 0.25, 0.25, 0.25}, 8);
    double prev = 1.0 + 1e-12;
    for (double m : {0.0, 2.0, 5.0, 10.0, 15.0}) {
        double s = 0.0;
        for (const auto& p : data)
            s += ssim(to_unit_range(apply(p.ihc, Perturbation::translate(m))), to_unit_range(p.ihc));
        s /= static_cast<double>(data.size());
        CHECK(s <= prev);
        prev = s;
    }
}

TEST_CASE("battery rows and errors") {
    const auto data = synth_dataset(6, 32, {0.5, 0.0, 0.0, 0.5}, 9);
    std::vector<Image> ihc;
    std::vector<int> y;
    for (const auto& p : data) {
        ihc.push_back(p.ihc);
        y.push_back(class_label(p, true));
    }
    nn::ResNetConfig cfg;
    cfg.width = 2;
    Classifier clf(cfg, true, 1);
    CHECK_ERROR_KIND(run_battery(ihc, y, clf), ErrorKind::invalid_state);
    clf.mark_trained();
    BatteryConfig bc;
    bc.rotations = {5};
    const auto rep = run_battery(ihc, y, clf, bc);
    REQUIRE(rep.rows.size() == 1 + 3 + 1 + 3);
    const auto& base = rep.rows.front();
    CHECK(base.name == "identical pair");
    CHECK(base.ssim == doctest::Approx(1.0));
    CHECK(std::isinf(base.psnr_db));
    CHECK(base.sfs == doctest::Approx((base.accuracy + 1) / 2));
    CHECK(rep.row("translate 5px").ssim_drop > 0.0);
    CHECK(std::isnan(rep.row("translate 5px").psnr_drop));
    CHECK_ERROR_KIND(rep.row("shear"), ErrorKind::invalid_argument);
    CHECK(rep.to_markdown().find("| elastic high |") != std::string::npos);
    CHECK(rep.to_json()["rows"].size() == rep.rows.size());
}
