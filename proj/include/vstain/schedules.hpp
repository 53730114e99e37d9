#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vstain {

enum class NoiseShape { linear, cosine };
enum class RestorationShape { linear, quadratic };

std::string_view to_string(NoiseShape s) noexcept;
std::string_view to_string(RestorationShape s) noexcept;
NoiseShape parse_noise_shape(std::string_view s);
RestorationShape parse_restoration_shape(std::string_view s);

/// Discretized noise and restoration schedules, stored at t = 0..T.
///
/// `alpha_bar[t]` scales the Gaussian noise and `beta_bar[t]` scales the
/// restoration residual in the forward marginal
/// `x_t = x_0 + alpha_bar[t] * eps + beta_bar[t] * r`. The reverse update at
/// step t (1-based) uses `gamma[t-1]` and `eta[t-1]`, the first differences of
/// the cumulative schedules, so a full reverse pass telescopes exactly.
struct SchedulePair {
    int T = 0;
    NoiseShape noise_shape = NoiseShape::linear;
    RestorationShape restoration_shape = RestorationShape::linear;
    std::vector<double> alpha_bar;
    std::vector<double> beta_bar;
    std::vector<double> gamma;
    std::vector<double> eta;

    double gamma_at(int t) const { return gamma.at(static_cast<std::size_t>(t - 1)); }
    double eta_at(int t) const { return eta.at(static_cast<std::size_t>(t - 1)); }

    friend bool operator==(const SchedulePair&, const SchedulePair&) = default;
};

struct ScheduleOptions {
    NoiseShape noise_shape = NoiseShape::linear;
    RestorationShape restoration_shape = RestorationShape::linear;
    double noise_amplitude = 1.0;       // alpha_bar[T]
    double restoration_amplitude = 1.0; // beta_bar[T]; 0 disables the restoration path
};

SchedulePair make_schedule(int T, const ScheduleOptions& opts = {});
SchedulePair make_schedule(int T, NoiseShape noise, RestorationShape restoration);

struct ReverseCoefficients {
    std::vector<double> gamma;
    std::vector<double> eta;
};

// First differences of the cumulative schedules. Rejects non-monotone input.
ReverseCoefficients reverse_coefficients(const std::vector<double>& alpha_bar,
                                         const std::vector<double>& beta_bar);

// Builds a schedule from explicit cumulative vectors (e.g. from a checkpoint).
SchedulePair schedule_from_cumulative(NoiseShape noise, RestorationShape restoration,
                                      std::vector<double> alpha_bar, std::vector<double> beta_bar);

// Throws invalid_argument if any type invariant is violated.
void validate(const SchedulePair& s);

} // namespace vstain
