#include "vstain/denoiser.hpp"

#include "vstain/archive.hpp"
#include "vstain/errors.hpp"
#include "vstain/nn/adam.hpp"
#include "vstain/rng.hpp"

#include <cmath>
#include <numeric>

namespace vstain {

void TrainConfig::validate() const {
    require(epochs >= 1, "train config: epochs must be >= 1");
    require(batch_size >= 1, "train config: batch_size must be >= 1");
    require(learning_rate > 0.0, "train config: learning_rate must be > 0");
    require(T >= 1, "train config: T must be >= 1");
    require(w_res >= 0.0 && w_eps >= 0.0 && w_res + w_eps > 0.0, "train config: loss weights must be >= 0 with a positive sum");
    require(checkpoint_interval >= 1, "train config: checkpoint_interval must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs}, {"batch_size", batch_size}, {"learning_rate", learning_rate}, {"T", T},
            {"w_res", w_res},   {"w_eps", w_eps},           {"seed", seed},                   {"checkpoint_interval", checkpoint_interval}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.T = j.value("T", c.T);
    c.w_res = j.value("w_res", c.w_res);
    c.w_eps = j.value("w_eps", c.w_eps);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    return c;
}

nn::Tensor to_tensor(const std::vector<const Image*>& images) {
    require(!images.empty(), "to_tensor: no images");
    const Image& first = *images.front();
    int channels = 0;
    for (const Image* img : images) {
        require(img->height == first.height && img->width == first.width, "to_tensor: spatial size mismatch");
        channels += img->channels;
    }
    nn::Tensor t(1, channels, first.height, first.width);
    std::size_t off = 0;
    for (const Image* img : images)
        for (double v : img->data) t.data[off++] = static_cast<float>(v);
    return t;
}

Image tensor_sample(const nn::Tensor& t, int index) {
    Image img(t.c, t.h, t.w);
    const float* src = t.sample(index);
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = src[i];
    return img;
}

DenoiserPair::DenoiserPair(const nn::UNetConfig& cfg, int T, std::uint64_t seed)
    : restorer(cfg, mix_seed(seed, 1)), noiser(cfg, mix_seed(seed, 2)), T_(T) {
    require(T >= 1, "DenoiserPair: T must be >= 1");
}

Prediction DenoiserPair::predict(const Image& x_t, int t, const Image& cond_he) const {
    if (t < 0 || t > T_)
        fail(ErrorKind::invalid_argument, "predict: timestep " + std::to_string(t) + " outside [0, " + std::to_string(T_) + "]");
    require_same_shape(x_t, cond_he, "predict");
    const nn::Tensor input = to_tensor({&x_t, &cond_he});
    Prediction p{tensor_sample(restorer.forward(input, {t}), 0), tensor_sample(noiser.forward(input, {t}), 0)};
    if (!all_finite(p.r_hat) || !all_finite(p.eps_hat))
        fail(ErrorKind::numeric_failure, "predict: non-finite network output at t = " + std::to_string(t));
    return p;
}

TrainBatch make_train_batch(const std::vector<const PairedPatch*>& records, const SchedulePair& s,
                            Orientation orientation, Rng& rng) {
    require(!records.empty(), "make_train_batch: empty batch");
    const int n = static_cast<int>(records.size());
    const Image& ref = records.front()->ihc;
    TrainBatch b;
    b.input = nn::Tensor(n, 2 * ref.channels, ref.height, ref.width);
    b.target_res = nn::Tensor(n, ref.channels, ref.height, ref.width);
    b.target_eps = nn::Tensor(n, ref.channels, ref.height, ref.width);
    b.t.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const PairedPatch& p = *records[static_cast<std::size_t>(i)];
        require(p.ihc.same_shape(ref) && p.he.same_shape(ref), "make_train_batch: records differ in shape");
        const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s.T)));
        Image eps(ref.channels, ref.height, ref.width);
        for (double& v : eps.data) v = rng.normal();
        const ResidualImage r = residual(p.ihc, p.he, orientation);
        const DiffusionSample xt = forward_sample(p.ihc, r, s, t, eps);
        b.t[static_cast<std::size_t>(i)] = t;
        float* in = b.input.sample(i);
        const std::size_t sz = ref.size();
        for (std::size_t j = 0; j < sz; ++j) {
            in[j] = static_cast<float>(xt.x_t.data[j]);
            in[sz + j] = static_cast<float>(p.he.data[j]);
            b.target_res.sample(i)[j] = static_cast<float>(r.r.data[j]);
            b.target_eps.sample(i)[j] = static_cast<float>(eps.data[j]);
        }
    }
    return b;
}

LossTerms denoiser_loss(DenoiserPair& pair, const TrainBatch& batch, double w_res, double w_eps, bool accumulate) {
    LossTerms out;
    nn::UNet::Cache cache;
    if (accumulate && w_res != 0.0) {
        const nn::Tensor r_hat = pair.restorer.forward(batch.input, batch.t, cache);
        out.res = nn::mse(r_hat, batch.target_res);
        pair.restorer.backward(cache, nn::mse_grad(r_hat, batch.target_res, w_res));
    } else {
        out.res = nn::mse(pair.restorer.forward(batch.input, batch.t), batch.target_res);
    }
    if (accumulate && w_eps != 0.0) {
        const nn::Tensor eps_hat = pair.noiser.forward(batch.input, batch.t, cache);
        out.eps = nn::mse(eps_hat, batch.target_eps);
        pair.noiser.backward(cache, nn::mse_grad(eps_hat, batch.target_eps, w_eps));
    } else {
        out.eps = nn::mse(pair.noiser.forward(batch.input, batch.t), batch.target_eps);
    }
    out.combined = w_res * out.res + w_eps * out.eps;
    return out;
}

namespace {

void put_params(Archive& ar, const std::string& prefix, const std::vector<const nn::Param*>& params) {
    for (const nn::Param* p : params) {
        std::vector<std::int64_t> shape(p->shape.begin(), p->shape.end());
        ar.put_f32(prefix + p->name, p->value, shape);
    }
}

void get_params(const Archive& ar, const std::string& prefix, const std::vector<nn::Param*>& params) {
    for (nn::Param* p : params) {
        auto v = ar.get_f32(prefix + p->name);
        if (v.size() != p->size())
            fail(ErrorKind::version_error, "checkpoint parameter '" + prefix + p->name + "' has the wrong size");
        p->value = std::move(v);
    }
}

nlohmann::json unet_json(const nn::UNetConfig& c) {
    return {{"in_channels", c.in_channels}, {"out_channels", c.out_channels}, {"width", c.width}, {"temb_dim", c.temb_dim}};
}

nn::UNetConfig unet_from_json(const nlohmann::json& j) {
    nn::UNetConfig c;
    c.in_channels = j.at("in_channels");
    c.out_channels = j.at("out_channels");
    c.width = j.at("width");
    c.temb_dim = j.at("temb_dim");
    return c;
}

} // namespace

void save_denoiser(const std::filesystem::path& path, const DenoiserCheckpoint& ckpt) {
    Archive ar;
    ar.meta = {{"kind", "denoiser"},
               {"format_version", kArchiveFormatVersion},
               {"network", unet_json(ckpt.pair.restorer.config())},
               {"train_config", ckpt.config.to_json()},
               {"orientation", to_string(ckpt.orientation)},
               {"trained", ckpt.pair.trained()},
               {"epoch", ckpt.epoch},
               {"schedule",
                {{"T", ckpt.schedule.T},
                 {"noise_shape", to_string(ckpt.schedule.noise_shape)},
                 {"restoration_shape", to_string(ckpt.schedule.restoration_shape)}}}};
    ar.put_f64("schedule/alpha_bar", ckpt.schedule.alpha_bar);
    ar.put_f64("schedule/beta_bar", ckpt.schedule.beta_bar);
    put_params(ar, "restorer/", ckpt.pair.restorer.params());
    put_params(ar, "noiser/", ckpt.pair.noiser.params());
    save_archive(path, ar);
}

DenoiserCheckpoint load_denoiser(const std::filesystem::path& path) {
    const Archive ar = load_archive(path);
    if (ar.meta.value("kind", "") != "denoiser")
        fail(ErrorKind::version_error, "'" + path.string() + "' is not a denoiser checkpoint");
    const auto& sj = ar.meta.at("schedule");
    DenoiserCheckpoint ck;
    ck.schedule = schedule_from_cumulative(parse_noise_shape(sj.at("noise_shape").get<std::string>()),
                                           parse_restoration_shape(sj.at("restoration_shape").get<std::string>()),
                                           ar.get_f64("schedule/alpha_bar"), ar.get_f64("schedule/beta_bar"));
    if (ck.schedule.T != sj.at("T").get<int>())
        fail(ErrorKind::version_error, "checkpoint schedule length does not match its T");
    ck.config = TrainConfig::from_json(ar.meta.at("train_config"));
    ck.orientation = parse_orientation(ar.meta.at("orientation").get<std::string>());
    ck.epoch = ar.meta.value("epoch", 0);
    ck.pair = DenoiserPair(unet_from_json(ar.meta.at("network")), ck.schedule.T, 0);
    get_params(ar, "restorer/", ck.pair.restorer.params());
    get_params(ar, "noiser/", ck.pair.noiser.params());
    ck.pair.mark_trained(ar.meta.value("trained", false));
    return ck;
}

TrainResult train_denoiser(const std::vector<PairedPatch>& data, const TrainConfig& cfg, const nn::UNetConfig& net,
                           const ScheduleOptions& schedule, Orientation orientation, const TrainHooks& hooks) {
    if (data.empty()) fail(ErrorKind::invalid_argument, "train: empty dataset");
    cfg.validate();

    TrainResult result;
    DenoiserCheckpoint& model = result.model;
    model.schedule = make_schedule(cfg.T, schedule);
    model.config = cfg;
    model.orientation = orientation;
    model.pair = DenoiserPair(net, cfg.T, cfg.seed);

    std::vector<const PairedPatch*> order;
    for (const auto& p : data) order.push_back(&p);

    auto batches_of = [&](const std::vector<const PairedPatch*>& items) {
        std::vector<std::vector<const PairedPatch*>> out;
        for (std::size_t i = 0; i < items.size(); i += static_cast<std::size_t>(cfg.batch_size))
            out.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(i),
                             items.begin() + static_cast<std::ptrdiff_t>(std::min(items.size(), i + cfg.batch_size)));
        return out;
    };

    {
        Rng rng(mix_seed(cfg.seed, 100));
        double total = 0.0;
        std::size_t count = 0;
        for (const auto& b : batches_of(order)) {
            const TrainBatch batch = make_train_batch(b, model.schedule, orientation, rng);
            total += denoiser_loss(model.pair, batch, cfg.w_res, cfg.w_eps, false).combined * static_cast<double>(b.size());
            count += b.size();
        }
        result.log.initial_loss = total / static_cast<double>(count);
    }

    nn::Adam opt_res(cfg.learning_rate), opt_eps(cfg.learning_rate);
    int last_saved = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order.begin(), order.end());
        EpochLog log{epoch, 0.0, 0.0, 0.0};
        std::size_t count = 0;
        int batch_index = 0;
        for (const auto& b : batches_of(order)) {
            const TrainBatch batch = make_train_batch(b, model.schedule, orientation, rng);
            model.pair.restorer.zero_grad();
            model.pair.noiser.zero_grad();
            const LossTerms l = denoiser_loss(model.pair, batch, cfg.w_res, cfg.w_eps, true);
            if (!std::isfinite(l.combined))
                fail(ErrorKind::training_failure,
                     "loss diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index) +
                         (last_saved > 0 ? "; last good checkpoint (epoch " + std::to_string(last_saved) + ") kept at '" +
                                               hooks.checkpoint_path.string() + "'"
                                         : "; no checkpoint written yet"));
            if (cfg.w_res != 0.0) opt_res.step(model.pair.restorer.params());
            if (cfg.w_eps != 0.0) opt_eps.step(model.pair.noiser.params());
            const auto w = static_cast<double>(b.size());
            log.loss += l.combined * w;
            log.loss_res += l.res * w;
            log.loss_eps += l.eps * w;
            count += b.size();
            ++batch_index;
        }
        log.loss /= static_cast<double>(count);
        log.loss_res /= static_cast<double>(count);
        log.loss_eps /= static_cast<double>(count);
        result.log.epochs.push_back(log);
        if (hooks.on_epoch) hooks.on_epoch(log);

        model.epoch = epoch;
        if (!hooks.checkpoint_path.empty() && (epoch % cfg.checkpoint_interval == 0 || epoch == cfg.epochs)) {
            model.pair.mark_trained(true);
            save_denoiser(hooks.checkpoint_path, model);
            last_saved = epoch;
        }
    }
    model.pair.mark_trained(true);
    return result;
}

} // namespace vstain
