#include "vstain/saliency.hpp"

#include "vstain/errors.hpp"
#include "vstain/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace vstain {

void SaliencyOptions::validate(int T, int height, int width) const {
    if (!(keep_prob > 0.0 && keep_prob < 1.0))
        fail(ErrorKind::invalid_argument, "saliency: keep probability must lie in (0, 1)");
    require(n_masks >= 1, "saliency: need at least one mask");
    require(cell >= 1 && height % cell == 0 && width % cell == 0, "saliency: cell must divide the image size");
    for (int t : timesteps)
        require(t >= 1 && t <= T, "saliency: probed timestep " + std::to_string(t) + " outside [1, T]");
}

Image rise_mask(int height, int width, int cell, double keep_prob, Rng& rng) {
    // one extra row and column so the shifted lookup never leaves the grid
    const int g = cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(g) * g);
    for (double& v : grid) v = rng.uniform() < keep_prob ? 1.0 : 0.0;
    const double ch = static_cast<double>(height) / cell, cw = static_cast<double>(width) / cell;
    const double oy = rng.uniform() * ch, ox = rng.uniform() * cw;
    Image m(1, height, width);
    for (int y = 0; y < height; ++y) {
        const double gy = (y + oy) / ch;
        const int y0 = static_cast<int>(gy);
        const double wy = gy - y0;
        for (int x = 0; x < width; ++x) {
            const double gx = (x + ox) / cw;
            const int x0 = static_cast<int>(gx);
            const double wx = gx - x0;
            const auto at = [&](int a, int b) { return grid[static_cast<std::size_t>(a) * g + b]; };
            m.at(0, y, x) = (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) +
                            wy * ((1 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
        }
    }
    return m;
}

void normalize_map(Image& map) {
    if (map.size() == 0) return;
    const auto [lo, hi] = std::minmax_element(map.data.begin(), map.data.end());
    const double a = *lo, b = *hi;
    if (!(b - a > 1e-12 * std::max(1.0, std::abs(b)))) {
        std::fill(map.data.begin(), map.data.end(), 0.0);
        return;
    }
    for (double& v : map.data) v = (v - a) / (b - a);
    for (double& v : map.data) v = std::clamp(v, 0.0, 1.0);
}

SaliencyMap rise_saliency(const Image& cond_he, const Predictor& predictor, const SchedulePair& s,
                          const SaliencyOptions& opts) {
    opts.validate(s.T, cond_he.height, cond_he.width);
    std::vector<int> steps = opts.timesteps;
    if (steps.empty()) steps = {s.T, (s.T + 1) / 2, 1};
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

    std::vector<double> fill = opts.fill.empty() ? channel_means(cond_he) : opts.fill;
    require(static_cast<int>(fill.size()) == cond_he.channels, "saliency: fill color needs one value per channel");

    std::map<int, Image> states;
    sample_ihc(cond_he, predictor, s, PathMask::both(), opts.sample_seed, [&](const DiffusionSample& st) {
        if (std::find(steps.begin(), steps.end(), st.t) != steps.end()) states.emplace(st.t, st.x_t);
    });

    const int h = cond_he.height, w = cond_he.width;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    SaliencyMap out;
    out.timesteps = steps;
    out.n_masks = opts.n_masks;
    out.keep_prob = opts.keep_prob;
    std::vector<std::vector<double>> acc(steps.size(), std::vector<double>(plane, 0.0));
    std::vector<double> score_sum(steps.size(), 0.0), removed(plane, 0.0);
    std::vector<Image> reference;
    for (int t : steps) {
        const DiffusionSample st{t, states.at(t), cond_he};
        const Prediction p = predictor.predict(st.x_t, t, cond_he);
        reference.push_back(reverse_step(st, p.r_hat, p.eps_hat, s).x_t);
    }

    Rng rng(mix_seed(opts.seed, 17));
    Image masked(cond_he.channels, h, w);
    for (int i = 0; i < opts.n_masks; ++i) {
        const Image m = rise_mask(h, w, opts.cell, opts.keep_prob, rng);
        for (int c = 0; c < cond_he.channels; ++c)
            for (std::size_t j = 0; j < plane; ++j) {
                const std::size_t k = static_cast<std::size_t>(c) * plane + j;
                masked.data[k] = m.data[j] * cond_he.data[k] + (1.0 - m.data[j]) * fill[static_cast<std::size_t>(c)];
            }
        for (std::size_t j = 0; j < plane; ++j) removed[j] += 1.0 - m.data[j];
        for (std::size_t k = 0; k < steps.size(); ++k) {
            const DiffusionSample st{steps[k], states.at(steps[k]), masked};
            const Prediction p = predictor.predict(st.x_t, steps[k], masked);
            const Image next = reverse_step(st, p.r_hat, p.eps_hat, s).x_t;
            double score = 0.0;
            for (std::size_t j = 0; j < next.size(); ++j) {
                const double d = next.data[j] - reference[k].data[j];
                score += d * d;
            }
            score /= static_cast<double>(next.size());
            score_sum[k] += score;
            for (std::size_t j = 0; j < plane; ++j) acc[k][j] += score * (1.0 - m.data[j]);
        }
    }
    const double norm = static_cast<double>(opts.n_masks) * (1.0 - opts.keep_prob);
    for (std::size_t k = 0; k < steps.size(); ++k) {
        Image map(1, h, w);
        // centering on the mean score removes the constant term that only adds variance
        const double mean_score = score_sum[k] / opts.n_masks;
        for (std::size_t j = 0; j < plane; ++j) map.data[j] = (acc[k][j] - mean_score * removed[j]) / norm;
        normalize_map(map);
        out.maps.push_back(std::move(map));
    }
    return out;
}

SaliencyMap rise_saliency(const Image& cond_he, const DenoiserPair& predictor, const SchedulePair& s,
                          const SaliencyOptions& opts) {
    if (!predictor.trained()) fail(ErrorKind::invalid_state, "saliency needs a trained denoiser");
    return rise_saliency(cond_he, static_cast<const Predictor&>(predictor), s, opts);
}

std::vector<std::uint8_t> heat_overlay(const Image& map, const Image& background, double alpha) {
    require(map.channels == 1 && background.channels == 3 && map.height == background.height &&
                map.width == background.width,
            "heat_overlay: expected a 1-channel map and a 3-channel background of equal size");
    const auto bg = denormalize(background);
    std::vector<std::uint8_t> out(bg.size());
    for (std::size_t j = 0; j < map.size(); ++j) {
        const double v = std::clamp(map.data[j], 0.0, 1.0);
        const double heat[3] = {255.0 * v, 255.0 * (1.0 - v), 0.0};
        for (int c = 0; c < 3; ++c) {
            const double b = bg[3 * j + static_cast<std::size_t>(c)];
            out[3 * j + static_cast<std::size_t>(c)] =
                static_cast<std::uint8_t>(std::lround(std::clamp(alpha * heat[c] + (1.0 - alpha) * b, 0.0, 255.0)));
        }
    }
    return out;
}

void write_npy(const std::filesystem::path& path, const SaliencyMap& map) {
    require(!map.maps.empty(), "write_npy: empty saliency map");
    const int h = map.maps.front().height, w = map.maps.front().width;
    std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + std::to_string(map.maps.size()) + ", " +
                         std::to_string(h) + ", " + std::to_string(w) + "), }";
    const std::size_t total = 10 + header.size() + 1;
    header.append((64 - total % 64) % 64, ' ');
    header.push_back('\n');
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::io_error, "cannot write '" + path.string() + "'");
    const char magic[] = "\x93NUMPY";
    f.write(magic, 6);
    const char version[2] = {1, 0};
    f.write(version, 2);
    const auto len = static_cast<std::uint16_t>(header.size());
    const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
    f.write(len_bytes, 2);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const Image& m : map.maps)
        f.write(reinterpret_cast<const char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!f) fail(ErrorKind::io_error, "failed writing '" + path.string() + "'");
}

} // namespace vstain
