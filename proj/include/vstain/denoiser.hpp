#pragma once

#include "vstain/dataio.hpp"
#include "vstain/diffusion.hpp"
#include "vstain/nn/unet.hpp"
#include "vstain/schedules.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace vstain {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 8;
    double learning_rate = 2e-3;
    int T = 20;
    double w_res = 1.0;
    double w_eps = 1.0;
    std::uint64_t seed = 0;
    int checkpoint_interval = 10;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Restoration predictor r(x_t, t, he) and noise predictor eps(x_t, t, he),
/// two independent networks that see x_t stacked with the H&E condition.
class DenoiserPair : public Predictor {
public:
    DenoiserPair() = default;
    DenoiserPair(const nn::UNetConfig& cfg, int T, std::uint64_t seed);

    Prediction predict(const Image& x_t, int t, const Image& cond_he) const override;

    int max_timestep() const noexcept { return T_; }
    int t_embedding_dim() const noexcept { return restorer.config().temb_dim; }
    bool trained() const noexcept { return trained_; }
    void mark_trained(bool v = true) noexcept { trained_ = v; }

    nn::UNet restorer;
    nn::UNet noiser;

private:
    int T_ = 0;
    bool trained_ = false;
};

// A batch in network layout: inputs [n, 6, H, W] and the two regression targets.
struct TrainBatch {
    nn::Tensor input;
    std::vector<int> t;
    nn::Tensor target_res;
    nn::Tensor target_eps;
};

struct LossTerms {
    double res = 0.0;
    double eps = 0.0;
    double combined = 0.0;
};

// Draws t in [1, T] and eps per record and forms x_t by the forward marginal.
TrainBatch make_train_batch(const std::vector<const PairedPatch*>& records, const SchedulePair& s,
                            Orientation orientation, Rng& rng);

// Combined loss w_res * MSE(r_hat, r) + w_eps * MSE(eps_hat, eps). With
// `accumulate` the gradients are added to both networks; a zero weight skips
// that network's backward pass entirely.
LossTerms denoiser_loss(DenoiserPair& pair, const TrainBatch& batch, double w_res, double w_eps, bool accumulate);

struct DenoiserCheckpoint {
    DenoiserPair pair;
    SchedulePair schedule;
    TrainConfig config;
    Orientation orientation = Orientation::he_minus_ihc;
    int epoch = 0;
};

void save_denoiser(const std::filesystem::path& path, const DenoiserCheckpoint& ckpt);
DenoiserCheckpoint load_denoiser(const std::filesystem::path& path);

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double loss_res = 0.0;
    double loss_eps = 0.0;
};

struct TrainLog {
    double initial_loss = 0.0; // combined loss of the untrained pair over the data
    std::vector<EpochLog> epochs;
};

struct TrainHooks {
    std::filesystem::path checkpoint_path; // empty: no checkpoints written
    std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
    DenoiserCheckpoint model;
    TrainLog log;
};

TrainResult train_denoiser(const std::vector<PairedPatch>& data, const TrainConfig& cfg, const nn::UNetConfig& net,
                           const ScheduleOptions& schedule, Orientation orientation, const TrainHooks& hooks = {});

// Conversions between model-range images and single-sample tensors.
nn::Tensor to_tensor(const std::vector<const Image*>& images);
Image tensor_sample(const nn::Tensor& t, int index);

} // namespace vstain
