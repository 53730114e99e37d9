#pragma once

#include "vstain/image.hpp"
#include "vstain/schedules.hpp"

#include <cstdint>
#include <functional>
#include <string_view>

namespace vstain {

// Which domain difference the restoration path carries.
//   he_minus_ihc: r = he - ihc, so x_T sits at the H&E patch (default)
//   ihc_minus_he: r = ihc - he, the literal textbook sign
enum class Orientation { he_minus_ihc, ihc_minus_he };

std::string_view to_string(Orientation o) noexcept;
Orientation parse_orientation(std::string_view s);

struct ResidualImage {
    Image r;
};

struct DiffusionSample {
    int t = 0;
    Image x_t;
    Image cond_he; // may be empty when the sample was produced without conditioning
};

struct PathMask {
    bool use_restoration = true;
    bool use_noise = true;

    static PathMask both() { return {true, true}; }
    static PathMask restoration_only() { return {true, false}; }
    static PathMask noise_only() { return {false, true}; }
};

std::string_view to_string(PathMask m) noexcept;
PathMask parse_path_mask(std::string_view s);

struct Prediction {
    Image r_hat;
    Image eps_hat;
};

// Anything that maps (x_t, t, cond_he) to restoration and noise estimates.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual Prediction predict(const Image& x_t, int t, const Image& cond_he) const = 0;
};

ResidualImage residual(const Image& target_ihc, const Image& source_he, Orientation orientation = Orientation::he_minus_ihc);

// Standard-normal image drawn from `seed`; the sampler uses the same draw.
Image draw_noise(int channels, int height, int width, std::uint64_t seed);

DiffusionSample forward_sample(const Image& x0, const ResidualImage& r, const SchedulePair& s, int t, const Image& eps);
DiffusionSample forward_sample(const Image& x0, const ResidualImage& r, const SchedulePair& s, int t, std::uint64_t rng_seed);

DiffusionSample reverse_step(const DiffusionSample& sample, const Image& r_hat, const Image& eps_hat,
                             const SchedulePair& s, PathMask mask = {});

using TrajectoryObserver = std::function<void(const DiffusionSample&)>;

// Runs the reverse chain from x_T = cond_he + alpha_bar[T] * eps down to t = 0
// and returns the clamped estimate. `observer` sees every state x_T..x_1
// before its update.
Image sample_ihc(const Image& cond_he, const Predictor& predictor, const SchedulePair& s, PathMask mask,
                 std::uint64_t rng_seed, const TrajectoryObserver& observer = {});

} // namespace vstain
