#include "vstain/diffusion.hpp"

#include "vstain/errors.hpp"
#include "vstain/rng.hpp"
#include "vstain/simd/kernels.hpp"

#include <string>

namespace vstain {

std::string_view to_string(Orientation o) noexcept {
    return o == Orientation::he_minus_ihc ? "he_minus_ihc" : "ihc_minus_he";
}

Orientation parse_orientation(std::string_view s) {
    if (s == "he_minus_ihc") return Orientation::he_minus_ihc;
    if (s == "ihc_minus_he") return Orientation::ihc_minus_he;
    fail(ErrorKind::invalid_argument, "unknown orientation '" + std::string(s) + "'");
}

std::string_view to_string(PathMask m) noexcept {
    if (m.use_restoration && m.use_noise) return "both";
    if (m.use_restoration) return "restoration";
    if (m.use_noise) return "noise";
    return "none";
}

PathMask parse_path_mask(std::string_view s) {
    if (s == "both") return PathMask::both();
    if (s == "restoration") return PathMask::restoration_only();
    if (s == "noise") return PathMask::noise_only();
    fail(ErrorKind::invalid_argument, "unknown path mask '" + std::string(s) + "' (expected both|restoration|noise)");
}

ResidualImage residual(const Image& target_ihc, const Image& source_he, Orientation orientation) {
    require_same_shape(target_ihc, source_he, "residual");
    return {orientation == Orientation::he_minus_ihc ? source_he - target_ihc : target_ihc - source_he};
}

Image draw_noise(int channels, int height, int width, std::uint64_t seed) {
    Image eps(channels, height, width);
    Rng rng(seed);
    for (double& v : eps.data) v = rng.normal();
    return eps;
}

namespace {

void check_timestep(int t, const SchedulePair& s) {
    if (t < 0 || t > s.T)
        fail(ErrorKind::invalid_argument, "timestep " + std::to_string(t) + " outside [0, " + std::to_string(s.T) + "]");
}

} // namespace

DiffusionSample forward_sample(const Image& x0, const ResidualImage& r, const SchedulePair& s, int t, const Image& eps) {
    check_timestep(t, s);
    require_same_shape(x0, r.r, "forward_sample residual");
    DiffusionSample out{t, x0, {}};
    if (t == 0) return out;
    require_same_shape(x0, eps, "forward_sample noise");
    const auto& k = simd::active();
    const double a = s.alpha_bar[static_cast<std::size_t>(t)];
    const double b = s.beta_bar[static_cast<std::size_t>(t)];
    // Zero coefficients skip their term so a disabled path cannot leak signed zeros.
    if (a != 0.0) k.axpy_f64(out.x_t.size(), a, eps.data.data(), out.x_t.data.data());
    if (b != 0.0) k.axpy_f64(out.x_t.size(), b, r.r.data.data(), out.x_t.data.data());
    return out;
}

DiffusionSample forward_sample(const Image& x0, const ResidualImage& r, const SchedulePair& s, int t,
                               std::uint64_t rng_seed) {
    check_timestep(t, s);
    if (t == 0) return forward_sample(x0, r, s, 0, Image{});
    return forward_sample(x0, r, s, t, draw_noise(x0.channels, x0.height, x0.width, rng_seed));
}

DiffusionSample reverse_step(const DiffusionSample& sample, const Image& r_hat, const Image& eps_hat,
                             const SchedulePair& s, PathMask mask) {
    require(mask.use_restoration || mask.use_noise, "path mask must enable at least one path");
    if (sample.t == 0) fail(ErrorKind::invalid_state, "reverse_step: sample is already at t = 0");
    check_timestep(sample.t, s);
    if (!sample.cond_he.data.empty()) require_same_shape(sample.x_t, sample.cond_he, "reverse_step condition");

    DiffusionSample out{sample.t - 1, sample.x_t, sample.cond_he};
    const auto& k = simd::active();
    const double g = s.gamma_at(sample.t);
    const double e = s.eta_at(sample.t);
    if (mask.use_restoration && g != 0.0) {
        require_same_shape(sample.x_t, r_hat, "reverse_step r_hat");
        k.axpy_f64(out.x_t.size(), -g, r_hat.data.data(), out.x_t.data.data());
    }
    if (mask.use_noise && e != 0.0) {
        require_same_shape(sample.x_t, eps_hat, "reverse_step eps_hat");
        k.axpy_f64(out.x_t.size(), -e, eps_hat.data.data(), out.x_t.data.data());
    }
    return out;
}

Image sample_ihc(const Image& cond_he, const Predictor& predictor, const SchedulePair& s, PathMask mask,
                 std::uint64_t rng_seed, const TrajectoryObserver& observer) {
    require(mask.use_restoration || mask.use_noise, "path mask must enable at least one path");
    require(cond_he.size() > 0, "sample_ihc: empty conditioning image");
    const Image eps = draw_noise(cond_he.channels, cond_he.height, cond_he.width, rng_seed);

    DiffusionSample state{s.T, cond_he, cond_he};
    const double a = s.alpha_bar.back();
    if (a != 0.0) simd::active().axpy_f64(state.x_t.size(), a, eps.data.data(), state.x_t.data.data());

    while (state.t > 0) {
        if (observer) observer(state);
        const Prediction p = predictor.predict(state.x_t, state.t, cond_he);
        require_same_shape(state.x_t, p.r_hat, "predictor r_hat");
        require_same_shape(state.x_t, p.eps_hat, "predictor eps_hat");
        state = reverse_step(state, p.r_hat, p.eps_hat, s, mask);
    }
    clamp_inplace(state.x_t, -1.0, 1.0);
    return std::move(state.x_t);
}

} // namespace vstain
