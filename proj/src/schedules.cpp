#include "vstain/schedules.hpp"

#include "vstain/errors.hpp"

#include <cmath>
#include <numbers>

namespace vstain {

std::string_view to_string(NoiseShape s) noexcept {
    return s == NoiseShape::linear ? "linear" : "cosine";
}

std::string_view to_string(RestorationShape s) noexcept {
    return s == RestorationShape::linear ? "linear" : "quadratic";
}

NoiseShape parse_noise_shape(std::string_view s) {
    if (s == "linear") return NoiseShape::linear;
    if (s == "cosine") return NoiseShape::cosine;
    fail(ErrorKind::invalid_argument, "unknown noise shape '" + std::string(s) + "'");
}

RestorationShape parse_restoration_shape(std::string_view s) {
    if (s == "linear") return RestorationShape::linear;
    if (s == "quadratic") return RestorationShape::quadratic;
    fail(ErrorKind::invalid_argument, "unknown restoration shape '" + std::string(s) + "'");
}

namespace {

double noise_ramp(NoiseShape shape, int t, int T) {
    const double u = static_cast<double>(t) / T;
    switch (shape) {
    case NoiseShape::linear: return u;
    case NoiseShape::cosine: return 1.0 - std::cos(0.5 * std::numbers::pi * u);
    }
    return u;
}

double restoration_ramp(RestorationShape shape, int t, int T) {
    const double u = static_cast<double>(t) / T;
    switch (shape) {
    case RestorationShape::linear: return u;
    case RestorationShape::quadratic: return u * u;
    }
    return u;
}

void check_cumulative(const std::vector<double>& v, const char* name) {
    if (v.size() < 2) fail(ErrorKind::invalid_argument, std::string(name) + ": need at least T+1 = 2 entries");
    for (double x : v)
        if (!std::isfinite(x)) fail(ErrorKind::invalid_argument, std::string(name) + ": non-finite entry");
    if (v.front() != 0.0) fail(ErrorKind::invalid_argument, std::string(name) + "[0] must be 0");
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1]) fail(ErrorKind::invalid_argument, std::string(name) + " is not non-decreasing");
}

} // namespace

ReverseCoefficients reverse_coefficients(const std::vector<double>& alpha_bar, const std::vector<double>& beta_bar) {
    check_cumulative(alpha_bar, "alpha_bar");
    check_cumulative(beta_bar, "beta_bar");
    require(alpha_bar.size() == beta_bar.size(), "alpha_bar and beta_bar lengths differ");
    ReverseCoefficients rc;
    const std::size_t T = alpha_bar.size() - 1;
    rc.gamma.resize(T);
    rc.eta.resize(T);
    for (std::size_t t = 1; t <= T; ++t) {
        rc.gamma[t - 1] = beta_bar[t] - beta_bar[t - 1];
        rc.eta[t - 1] = alpha_bar[t] - alpha_bar[t - 1];
    }
    return rc;
}

SchedulePair schedule_from_cumulative(NoiseShape noise, RestorationShape restoration,
                                      std::vector<double> alpha_bar, std::vector<double> beta_bar) {
    auto rc = reverse_coefficients(alpha_bar, beta_bar);
    SchedulePair s;
    s.T = static_cast<int>(alpha_bar.size()) - 1;
    s.noise_shape = noise;
    s.restoration_shape = restoration;
    s.alpha_bar = std::move(alpha_bar);
    s.beta_bar = std::move(beta_bar);
    s.gamma = std::move(rc.gamma);
    s.eta = std::move(rc.eta);
    return s;
}

SchedulePair make_schedule(int T, const ScheduleOptions& opts) {
    if (T < 1) fail(ErrorKind::invalid_argument, "make_schedule: T must be >= 1, got " + std::to_string(T));
    require(std::isfinite(opts.noise_amplitude) && opts.noise_amplitude >= 0.0, "noise amplitude must be >= 0");
    require(std::isfinite(opts.restoration_amplitude) && opts.restoration_amplitude >= 0.0,
            "restoration amplitude must be >= 0");

    std::vector<double> alpha_bar(static_cast<std::size_t>(T) + 1);
    std::vector<double> beta_bar(static_cast<std::size_t>(T) + 1);
    for (int t = 0; t <= T; ++t) {
        alpha_bar[static_cast<std::size_t>(t)] = opts.noise_amplitude * noise_ramp(opts.noise_shape, t, T);
        beta_bar[static_cast<std::size_t>(t)] = opts.restoration_amplitude * restoration_ramp(opts.restoration_shape, t, T);
    }
    // Pin the endpoints so they are exact regardless of ramp rounding.
    alpha_bar.front() = 0.0;
    beta_bar.front() = 0.0;
    alpha_bar.back() = opts.noise_amplitude;
    beta_bar.back() = opts.restoration_amplitude;
    return schedule_from_cumulative(opts.noise_shape, opts.restoration_shape, std::move(alpha_bar), std::move(beta_bar));
}

SchedulePair make_schedule(int T, NoiseShape noise, RestorationShape restoration) {
    ScheduleOptions opts;
    opts.noise_shape = noise;
    opts.restoration_shape = restoration;
    return make_schedule(T, opts);
}

void validate(const SchedulePair& s) {
    require(s.T >= 1, "schedule: T must be >= 1");
    const auto n = static_cast<std::size_t>(s.T) + 1;
    require(s.alpha_bar.size() == n && s.beta_bar.size() == n, "schedule: cumulative vectors must have T+1 entries");
    require(s.gamma.size() == n - 1 && s.eta.size() == n - 1, "schedule: coefficient vectors must have T entries");
    const auto rc = reverse_coefficients(s.alpha_bar, s.beta_bar);
    require(rc.gamma == s.gamma && rc.eta == s.eta, "schedule: coefficients are not first differences");
}

} // namespace vstain
