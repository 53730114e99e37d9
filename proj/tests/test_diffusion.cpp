#include "support.hpp"

#include "vstain/diffusion.hpp"

#include <cmath>

using namespace vstain;
using vstain::test::normal_image;
using vstain::test::random_image;

namespace {

// Returns the true residual and noise regardless of its inputs.
class OraclePredictor : public Predictor {
public:
    OraclePredictor(Image r, Image eps) : r_(std::move(r)), eps_(std::move(eps)) {}
    Prediction predict(const Image&, int, const Image&) const override { return {r_, eps_}; }

private:
    Image r_, eps_;
};

// A fixed nonlinear function of its inputs.
class ToyPredictor : public Predictor {
public:
    Prediction predict(const Image& x_t, int t, const Image& cond) const override {
        Prediction p{Image(x_t.channels, x_t.height, x_t.width), Image(x_t.channels, x_t.height, x_t.width)};
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            p.r_hat.data[i] = 0.5 * std::tanh(cond.data[i] - 0.1 * t);
            p.eps_hat.data[i] = std::sin(x_t.data[i] + cond.data[i]);
        }
        return p;
    }
};

} // namespace

TEST_CASE("residual orientation and elementwise oracle") {
    const Image a = random_image(3, 8, 8, 1), b = random_image(3, 8, 8, 2);
    CHECK(residual(a, a).r == Image(3, 8, 8, 0.0));
    CHECK(residual(Image(3, 4, 4, 0.0), Image(3, 4, 4, 1.0)).r == Image(3, 4, 4, 1.0));
    const auto r = residual(a, b, Orientation::he_minus_ihc).r;
    const auto q = residual(a, b, Orientation::ihc_minus_he).r;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(r.data[i] == b.data[i] - a.data[i]);
        CHECK(q.data[i] == a.data[i] - b.data[i]);
    }
    CHECK_ERROR_KIND(residual(a, Image(3, 8, 7)), ErrorKind::invalid_argument);
}

TEST_CASE("forward marginal") {
    const auto s = make_schedule(10, NoiseShape::linear, RestorationShape::linear);
    const Image x0 = random_image(3, 6, 6, 3), eps = normal_image(3, 6, 6, 4);
    const ResidualImage r{random_image(3, 6, 6, 5)};

    CHECK(forward_sample(x0, r, s, 0, eps).x_t == x0);
    CHECK(forward_sample(x0, r, s, 0, std::uint64_t{9}).x_t == x0);
    CHECK(forward_sample(x0, ResidualImage{Image(3, 6, 6)}, s, 7, Image(3, 6, 6)).x_t == x0);

    const auto x5 = forward_sample(x0, r, s, 5, eps);
    CHECK(x5.t == 5);
    for (std::size_t i = 0; i < x0.size(); ++i)
        CHECK(x5.x_t.data[i] == doctest::Approx(x0.data[i] + s.alpha_bar[5] * eps.data[i] + 0.5 * r.r.data[i]).epsilon(1e-14));

    CHECK_ERROR_KIND(forward_sample(x0, r, s, 11, eps), ErrorKind::invalid_argument);
    CHECK_ERROR_KIND(forward_sample(x0, r, s, -1, eps), ErrorKind::invalid_argument);
}

TEST_CASE("seeded forward sample uses the sampler's noise draw") {
    const auto s = make_schedule(10, NoiseShape::cosine, RestorationShape::linear);
    const Image x0 = random_image(3, 5, 5, 3);
    const ResidualImage r{random_image(3, 5, 5, 5)};
    const auto a = forward_sample(x0, r, s, 4, std::uint64_t{77});
    const auto b = forward_sample(x0, r, s, 4, draw_noise(3, 5, 5, 77));
    CHECK(a.x_t == b.x_t);
}

TEST_CASE("reverse step follows the dual-path update") {
    const auto s = make_schedule(4, NoiseShape::linear, RestorationShape::linear);
    const Image x = random_image(3, 4, 4, 11), rh = random_image(3, 4, 4, 12), eh = random_image(3, 4, 4, 13);
    const DiffusionSample st{3, x, {}};

    const auto ro = reverse_step(st, rh, eh, s, PathMask::restoration_only());
    CHECK(ro.t == 2);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(ro.x_t.data[i] == doctest::Approx(x.data[i] - 0.25 * rh.data[i]));

    const auto zero = reverse_step(st, Image(3, 4, 4), Image(3, 4, 4), s);
    CHECK(zero.x_t == x);

    CHECK_ERROR_KIND(reverse_step(DiffusionSample{0, x, {}}, rh, eh, s), ErrorKind::invalid_state);
    CHECK_ERROR_KIND(reverse_step(st, rh, eh, s, PathMask{false, false}), ErrorKind::invalid_argument);
}

TEST_CASE("noise-only step with a disabled restoration schedule is the plain DDPM-form step") {
    ScheduleOptions o;
    o.restoration_amplitude = 0.0;
    const auto s = make_schedule(8, o);
    const Image x = random_image(3, 4, 4, 21), rh = random_image(3, 4, 4, 22), eh = random_image(3, 4, 4, 23);
    const DiffusionSample st{5, x, {}};
    Image expected = x;
    for (std::size_t i = 0; i < x.size(); ++i) expected.data[i] = x.data[i] - s.eta_at(5) * eh.data[i];
    const auto both = reverse_step(st, rh, eh, s, PathMask::both());
    const auto noise = reverse_step(st, rh, eh, s, PathMask::noise_only());
    CHECK(both.x_t == noise.x_t);
    CHECK(max_abs_diff(noise.x_t, expected) <= 1e-15);
}

TEST_CASE("path-mask additivity") {
    const auto s = make_schedule(10, NoiseShape::cosine, RestorationShape::quadratic);
    for (int t : {1, 4, 10}) {
        const Image x = random_image(3, 6, 6, 30 + t), rh = random_image(3, 6, 6, 40 + t), eh = normal_image(3, 6, 6, 50 + t);
        const DiffusionSample st{t, x, {}};
        const auto both = reverse_step(st, rh, eh, s, PathMask::both()).x_t;
        const auto ro = reverse_step(st, rh, eh, s, PathMask::restoration_only()).x_t;
        const auto no = reverse_step(st, rh, eh, s, PathMask::noise_only()).x_t;
        CHECK(max_abs_diff(both, ro + no - x) <= 1e-14);
    }
}

TEST_CASE("oracle predictors invert the forward marginal") {
    for (int T : {1, 10, 100})
        for (auto n : {NoiseShape::linear, NoiseShape::cosine})
            for (auto rs : {RestorationShape::linear, RestorationShape::quadratic}) {
                const auto s = make_schedule(T, n, rs);
                const Image ihc = random_image(3, 8, 8, 100 + T, -0.9, 0.9);
                const Image he = random_image(3, 8, 8, 200 + T, -0.9, 0.9);
                const ResidualImage r = residual(ihc, he);
                const Image eps = draw_noise(3, 8, 8, 300 + T);

                DiffusionSample st = forward_sample(ihc, r, s, T, eps);
                st.cond_he = he;
                while (st.t > 0) st = reverse_step(st, r.r, eps, s);
                CHECK(max_abs_diff(st.x_t, ihc) <= 1e-5);

                const OraclePredictor oracle(r.r, eps);
                const Image out = sample_ihc(he, oracle, s, PathMask::both(), 300 + T);
                CHECK(max_abs_diff(out, ihc) <= 1e-5);
            }
}

TEST_CASE("sampler starts at the H&E patch plus terminal noise") {
    const auto s = make_schedule(5, NoiseShape::linear, RestorationShape::linear);
    const Image he = random_image(3, 4, 4, 7);
    Image first;
    sample_ihc(he, ToyPredictor{}, s, PathMask::both(), 42, [&](const DiffusionSample& st) {
        if (st.t == 5) first = st.x_t;
    });
    CHECK(max_abs_diff(first, he + draw_noise(3, 4, 4, 42)) == 0.0);
}

TEST_CASE("disabled restoration makes sampling independent of the residual") {
    ScheduleOptions o;
    o.restoration_amplitude = 0.0;
    const auto s = make_schedule(10, o);
    const Image x0 = random_image(3, 6, 6, 1), eps = normal_image(3, 6, 6, 2);
    const ResidualImage r1{random_image(3, 6, 6, 3)}, r2{random_image(3, 6, 6, 4)};
    for (int t = 0; t <= 10; ++t) CHECK(forward_sample(x0, r1, s, t, eps).x_t == forward_sample(x0, r2, s, t, eps).x_t);
    const Image he = random_image(3, 6, 6, 5);
    const OraclePredictor p1(r1.r, eps), p2(r2.r, eps);
    CHECK(sample_ihc(he, p1, s, PathMask::both(), 9) == sample_ihc(he, p2, s, PathMask::both(), 9));
}

TEST_CASE("sampling is deterministic and clamped") {
    const auto s = make_schedule(6, NoiseShape::linear, RestorationShape::linear);
    const Image he = random_image(3, 5, 5, 8);
    const auto a = sample_ihc(he, ToyPredictor{}, s, PathMask::both(), 3);
    const auto b = sample_ihc(he, ToyPredictor{}, s, PathMask::both(), 3);
    CHECK(a == b);
    for (double v : a.data) CHECK((v >= -1.0 && v <= 1.0));
    int states = 0;
    sample_ihc(he, ToyPredictor{}, s, PathMask::noise_only(), 3, [&](const DiffusionSample&) { ++states; });
    CHECK(states == 6);
}

TEST_CASE("path mask names") {
    CHECK(to_string(parse_path_mask("restoration")) == "restoration");
    CHECK(to_string(parse_path_mask("noise")) == "noise");
    CHECK(to_string(parse_path_mask("both")) == "both");
    CHECK_ERROR_KIND(parse_path_mask("neither"), ErrorKind::invalid_argument);
    CHECK(parse_orientation("ihc_minus_he") == Orientation::ihc_minus_he);
}
