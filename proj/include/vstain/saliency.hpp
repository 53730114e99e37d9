#pragma once

#include "vstain/denoiser.hpp"
#include "vstain/diffusion.hpp"
#include "vstain/image.hpp"
#include "vstain/schedules.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace vstain {

struct SaliencyOptions {
    std::vector<int> timesteps;   // probed steps in [1, T]; empty: {T, ceil(T/2), 1}
    int n_masks = 1000;
    double keep_prob = 0.5;
    int cell = 8;                 // masks are drawn on a cell x cell grid
    std::uint64_t seed = 0;       // masks
    std::uint64_t sample_seed = 0; // sampler noise for the unmasked trajectory
    std::vector<double> fill;     // per-channel fill for removed regions; empty: mean color of cond_he

    void validate(int T, int height, int width) const;
};

struct SaliencyMap {
    std::vector<int> timesteps;
    std::vector<Image> maps; // one 1 x H x W map in [0, 1] per probed step
    int n_masks = 0;
    double keep_prob = 0.0;
};

// Smooth random mask in [0, 1]: a cell x cell Bernoulli(keep_prob) grid,
// upsampled bilinearly with a random sub-cell shift.
Image rise_mask(int height, int width, int cell, double keep_prob, Rng& rng);

// Per-step RISE probe. x_t at each probed step comes from the unmasked
// sampler trajectory; every mask replaces the removed part of cond_he with the
// fill color and is scored by the mean squared deviation of the masked single
// reverse update from the unmasked one. A pixel's saliency is the average of
// the centered score (score minus its mean over masks) weighted by how much
// each mask removed it.
SaliencyMap rise_saliency(const Image& cond_he, const Predictor& predictor, const SchedulePair& s,
                          const SaliencyOptions& opts);
SaliencyMap rise_saliency(const Image& cond_he, const DenoiserPair& predictor, const SchedulePair& s,
                          const SaliencyOptions& opts);

// Min-max normalization to [0, 1]; a constant map becomes all zeros.
void normalize_map(Image& map);

// Red = high, green = low, blended over the H&E patch.
std::vector<std::uint8_t> heat_overlay(const Image& map, const Image& background, double alpha = 0.5);

// float64 .npy array of shape (steps, H, W).
void write_npy(const std::filesystem::path& path, const SaliencyMap& map);

} // namespace vstain
