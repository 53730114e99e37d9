#include "cli.hpp"

#include "vstain/archive.hpp"
#include "vstain/dataio.hpp"
#include "vstain/denoiser.hpp"
#include "vstain/diffusion.hpp"
#include "vstain/errors.hpp"
#include "vstain/perturb.hpp"
#include "vstain/png_io.hpp"
#include "vstain/quality_metrics.hpp"
#include "vstain/saliency.hpp"
#include "vstain/sfs.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace vstain::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::io_error, "cannot write '" + path.string() + "'");
    f << text;
    if (!f) fail(ErrorKind::io_error, "failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) fail(ErrorKind::io_error, "cannot create output directory '" + dir.string() + "'");
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) fail(ErrorKind::io_error, "output directory '" + dir.string() + "' is not writable");
    }
    fs::remove(probe, ec);
}

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    if (text.empty()) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !(is >> std::ws).eof())
            fail(ErrorKind::parse_error, std::string(what) + ": cannot parse '" + item + "'");
        out.push_back(v);
    }
    return out;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<PairedPatch> select_split(const Dataset& ds, const std::string& split) {
    if (split == "all") return ds.records;
    const std::vector<std::string>* ids = nullptr;
    if (split == "train") ids = &ds.split.train;
    else if (split == "val") ids = &ds.split.val;
    else if (split == "test") ids = &ds.split.test;
    else fail(ErrorKind::invalid_argument, "unknown split '" + split + "' (expected train, val, test or all)");
    if (ids->empty()) fail(ErrorKind::invalid_argument, "split '" + split + "' of the dataset is empty");
    return ds.subset(*ids);
}

std::map<std::string, fs::path> list_pngs(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail(ErrorKind::io_error, "'" + dir.string() + "' is not a directory");
    std::map<std::string, fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") out.emplace(e.path().stem().string(), e.path());
    return out;
}

Classifier open_classifier(const fs::path& path, const std::string& stage) {
    if (fs::is_directory(path)) {
        const fs::path file = path / ("classifier_" + std::string(to_string(parse_fit_stage(stage))) + ".vsta");
        if (!fs::exists(file)) fail(ErrorKind::invalid_state, "missing classifier checkpoint '" + file.string() + "'");
        return load_classifier(file);
    }
    if (!fs::exists(path)) fail(ErrorKind::io_error, "classifier checkpoint '" + path.string() + "' not found");
    return load_classifier(path);
}

DenoiserCheckpoint open_denoiser(const fs::path& path) {
    if (!fs::exists(path)) fail(ErrorKind::io_error, "checkpoint '" + path.string() + "' not found");
    return load_denoiser(path);
}

struct Context {
    std::vector<std::string> argv;
    std::uint64_t seed = 0;
    fs::path out;
    fs::path config;
    std::ostream* log = nullptr;

    void manifest(const std::string& command, json config_json) const {
        json m = {{"tool", "vstain"},
                  {"tool_version", kToolVersion},
                  {"format_version", kArchiveFormatVersion},
                  {"command", command},
                  {"seed", seed},
                  {"out", out.string()},
                  {"config", std::move(config_json)},
                  {"argv", argv},
                  {"created_utc", utc_now()}};
        if (!config.empty()) m["config_file"] = config.string();
        write_json(out / "manifest.json", m);
    }
};

// ---------------------------------------------------------------- synth-data

struct SynthArgs {
    int n = 200;
    int size = 64;
    std::string class_balance = "0.25,0.25,0.25,0.25";
    double test_fraction = 0.2;
    int max_shift = 0;
    std::string structure = "blobs";
    double expression_noise = 0.3;
    double pixel_noise = 0.02;
};

void cmd_synth(const Context& ctx, const SynthArgs& a) {
    const auto bal = parse_list<double>(a.class_balance, "--class-balance");
    if (bal.size() != 4) fail(ErrorKind::invalid_argument, "--class-balance needs 4 probabilities");
    SynthOptions opts;
    if (a.structure == "blobs") opts.structure = SynthStructure::blobs;
    else if (a.structure == "single_blob") opts.structure = SynthStructure::single_blob;
    else fail(ErrorKind::invalid_argument, "--structure must be blobs or single_blob");
    opts.max_shift = a.max_shift;
    opts.expression_noise = a.expression_noise;
    opts.pixel_noise = a.pixel_noise;
    ensure_dir(ctx.out);
    const auto records = synth_dataset(a.n, a.size, {bal[0], bal[1], bal[2], bal[3]}, ctx.seed, opts);
    const auto test_ids = split_test_ids(records, a.test_fraction, ctx.seed);
    write_bci(ctx.out, records, test_ids);
    ctx.manifest("synth-data", {{"n", a.n},
                                {"size", a.size},
                                {"class_balance", bal},
                                {"test_fraction", a.test_fraction},
                                {"max_shift", a.max_shift},
                                {"structure", a.structure},
                                {"expression_noise", a.expression_noise},
                                {"pixel_noise", a.pixel_noise}});
    *ctx.log << "wrote " << records.size() << " pairs (" << test_ids.size() << " test) to " << ctx.out.string() << "\n";
}

// --------------------------------------------------------------------- train

struct TrainArgs {
    fs::path data;
    std::string split = "train";
    int epochs = 30;
    int batch_size = 8;
    double lr = 2e-3;
    int T = 20;
    double w_res = 1.0;
    double w_eps = 1.0;
    int width = 16;
    int checkpoint_interval = 10;
    std::string noise_shape = "linear";
    std::string restoration_shape = "linear";
    double noise_amplitude = 1.0;
    double restoration_amplitude = 1.0;
    std::string orientation = "he_minus_ihc";
};

void cmd_train(const Context& ctx, const TrainArgs& a) {
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.lr;
    cfg.T = a.T;
    cfg.w_res = a.w_res;
    cfg.w_eps = a.w_eps;
    cfg.seed = ctx.seed;
    cfg.checkpoint_interval = a.checkpoint_interval;
    cfg.validate();
    ScheduleOptions sched;
    sched.noise_shape = parse_noise_shape(a.noise_shape);
    sched.restoration_shape = parse_restoration_shape(a.restoration_shape);
    sched.noise_amplitude = a.noise_amplitude;
    sched.restoration_amplitude = a.restoration_amplitude;
    const Orientation orientation = parse_orientation(a.orientation);
    nn::UNetConfig net;
    net.width = a.width;

    const Dataset ds = load_bci(a.data);
    const auto records = select_split(ds, a.split);
    ensure_dir(ctx.out);

    std::ostringstream csv;
    csv << "epoch,loss,loss_res,loss_eps\n";
    csv.precision(10);
    TrainHooks hooks;
    hooks.checkpoint_path = ctx.out / "denoiser.vsta";
    hooks.on_epoch = [&](const EpochLog& e) {
        csv << e.epoch << ',' << e.loss << ',' << e.loss_res << ',' << e.loss_eps << '\n';
        *ctx.log << "epoch " << e.epoch << "/" << cfg.epochs << " loss " << e.loss << "\n";
    };
    const TrainResult r = train_denoiser(records, cfg, net, sched, orientation, hooks);
    write_text(ctx.out / "loss.csv", csv.str());

    json epochs = json::array();
    for (const auto& e : r.log.epochs)
        epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"loss_res", e.loss_res}, {"loss_eps", e.loss_eps}});
    write_json(ctx.out / "train_log.json",
               {{"initial_loss", r.log.initial_loss},
                {"final_loss", r.log.epochs.back().loss},
                {"n_train", records.size()},
                {"parameters_per_network", r.model.pair.restorer.parameter_count()},
                {"epochs", epochs}});
    json c = cfg.to_json();
    c["data"] = a.data.string();
    c["split"] = a.split;
    c["width"] = a.width;
    c["noise_shape"] = a.noise_shape;
    c["restoration_shape"] = a.restoration_shape;
    c["noise_amplitude"] = a.noise_amplitude;
    c["restoration_amplitude"] = a.restoration_amplitude;
    c["orientation"] = a.orientation;
    ctx.manifest("train", c);
}

// -------------------------------------------------------------------- sample

struct SampleArgs {
    fs::path checkpoint;
    fs::path data;
    std::string split = "test";
    std::string mask = "both";
    int runs = 1;
    int limit = 0;
    int expect_T = 0;
};

void cmd_sample(const Context& ctx, const SampleArgs& a) {
    const PathMask mask = parse_path_mask(a.mask);
    require(a.runs >= 1, "--runs must be >= 1");
    const DenoiserCheckpoint ck = open_denoiser(a.checkpoint);
    if (a.expect_T > 0 && a.expect_T != ck.schedule.T)
        fail(ErrorKind::version_error, "checkpoint schedule has T = " + std::to_string(ck.schedule.T) +
                                           " but T = " + std::to_string(a.expect_T) + " was requested");
    if (!ck.pair.trained()) fail(ErrorKind::invalid_state, "checkpoint holds an untrained denoiser");
    const Dataset ds = load_bci(a.data);
    auto records = select_split(ds, a.split);
    if (a.limit > 0 && static_cast<std::size_t>(a.limit) < records.size()) records.resize(static_cast<std::size_t>(a.limit));
    ensure_dir(ctx.out);
    for (int run = 0; run < a.runs; ++run) {
        const fs::path dir = a.runs == 1 ? ctx.out : ctx.out / ("run_" + std::to_string(run));
        ensure_dir(dir);
        const std::uint64_t run_seed = mix_seed(ctx.seed, static_cast<std::uint64_t>(run));
        for (const auto& p : records) {
            const Image out = sample_ihc(p.he, ck.pair, ck.schedule, mask, mix_seed(run_seed, fnv1a(p.id)));
            write_png(dir / (p.id + ".png"), out);
        }
        *ctx.log << "run " << run << ": " << records.size() << " patches -> " << dir.string() << "\n";
    }
    ctx.manifest("sample", {{"checkpoint", a.checkpoint.string()},
                            {"data", a.data.string()},
                            {"split", a.split},
                            {"mask", a.mask},
                            {"runs", a.runs},
                            {"limit", a.limit},
                            {"T", ck.schedule.T},
                            {"orientation", std::string(to_string(ck.orientation))}});
}

// ------------------------------------------------------------------ evaluate

struct EvaluateArgs {
    fs::path generated;
    std::vector<std::string> methods;
    fs::path data;
    std::string split = "test";
    fs::path classifier;
    std::string stage = "properly_fit";
    int runs = 1;
};

struct RunMetrics {
    QualityResult quality;
    std::optional<SFSReport> sfs;
};

RunMetrics evaluate_dir(const fs::path& dir, const Dataset& ds, const std::set<std::string>& split_ids,
                        const Classifier* clf) {
    const auto files = list_pngs(dir);
    if (files.empty()) fail(ErrorKind::pairing_error, "no generated PNGs in '" + dir.string() + "'");
    std::vector<Image> gen, real;
    std::vector<int> truth;
    for (const auto& [id, path] : files) {
        if (!split_ids.contains(id))
            fail(ErrorKind::pairing_error, "generated patch '" + id + "' in '" + dir.string() + "' has no reference IHC");
        const PairedPatch& p = ds.by_id(id);
        gen.push_back(read_png(path));
        if (!gen.back().same_shape(p.ihc))
            fail(ErrorKind::pairing_error, "generated patch '" + id + "' differs in size from its reference");
        real.push_back(p.ihc);
        if (clf) truth.push_back(clf->label_of(p));
    }
    RunMetrics m;
    m.quality = evaluate_quality(gen, real);
    if (clf) {
        m.sfs = compute_sfs(clf->predict(real), clf->predict(gen), truth, clf->classes());
        m.sfs->classifier_stage = clf->stage;
    }
    return m;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (std::isinf(m)) return {m, 0.0};
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

void cmd_evaluate(const Context& ctx, const EvaluateArgs& a) {
    require(a.runs >= 1, "--runs must be >= 1");
    std::vector<std::pair<std::string, fs::path>> methods;
    if (!a.generated.empty()) methods.emplace_back("generated", a.generated);
    for (const auto& m : a.methods) {
        const auto eq = m.find('=');
        if (eq == std::string::npos || eq == 0) fail(ErrorKind::invalid_argument, "--method expects name=dir, got '" + m + "'");
        methods.emplace_back(m.substr(0, eq), m.substr(eq + 1));
    }
    if (methods.empty()) fail(ErrorKind::invalid_argument, "give --generated or at least one --method name=dir");

    const Dataset ds = load_bci(a.data);
    const auto split_records = select_split(ds, a.split);
    std::set<std::string> split_ids;
    for (const auto& p : split_records) split_ids.insert(p.id);
    std::optional<Classifier> clf;
    if (!a.classifier.empty()) clf = open_classifier(a.classifier, a.stage);

    json report = {{"split", a.split}, {"runs", a.runs}, {"methods", json::array()}};
    std::map<std::string, QualityResult> for_rank;
    std::ostringstream md;
    md.setf(std::ios::fixed);
    md.precision(4);
    md << "| Method | SSIM | PSNR (dB) | Accuracy | SFS |\n|---|---|---|---|---|\n";
    for (const auto& [name, dir] : methods) {
        std::vector<double> ssim, psnr, acc, sfs;
        json runs = json::array();
        int n_pairs = 0;
        for (int r = 0; r < a.runs; ++r) {
            const fs::path run_dir = a.runs == 1 ? dir : dir / ("run_" + std::to_string(r));
            const RunMetrics m = evaluate_dir(run_dir, ds, split_ids, clf ? &*clf : nullptr);
            n_pairs = m.quality.n_pairs;
            ssim.push_back(m.quality.ssim);
            psnr.push_back(m.quality.psnr_db);
            json rj = m.quality.to_json();
            if (m.sfs) {
                acc.push_back(m.sfs->acc_gen);
                sfs.push_back(m.sfs->sfs);
                rj["accuracy"] = m.sfs->acc_gen;
                rj["sfs"] = m.sfs->to_json();
            }
            runs.push_back(rj);
        }
        const auto [s_mean, s_std] = mean_std(ssim);
        const auto [p_mean, p_std] = mean_std(psnr);
        json mj = {{"method", name}, {"dir", dir.string()}, {"n_pairs", n_pairs}, {"ssim", s_mean},
                   {"psnr_db", json_number(p_mean)}};
        if (a.runs > 1) {
            mj["ssim_std"] = s_std;
            mj["psnr_db_std"] = json_number(p_std);
        }
        md << "| " << name << " | " << s_mean;
        if (a.runs > 1) md << " ± " << s_std;
        md << " | " << (std::isinf(p_mean) ? std::string("Inf") : (std::ostringstream() << std::fixed << std::setprecision(2) << p_mean).str());
        if (a.runs > 1 && !std::isinf(p_mean)) md << " ± " << p_std;
        if (clf) {
            const auto [a_mean, a_std] = mean_std(acc);
            const auto [f_mean, f_std] = mean_std(sfs);
            mj["accuracy"] = a_mean;
            mj["sfs"] = f_mean;
            if (a.runs > 1) {
                mj["accuracy_std"] = a_std;
                mj["sfs_std"] = f_std;
            }
            md << " | " << a_mean;
            if (a.runs > 1) md << " ± " << a_std;
            md << " | " << f_mean;
            if (a.runs > 1) md << " ± " << f_std;
            md << " |\n";
        } else {
            md << " | - | - |\n";
        }
        mj["runs"] = runs;
        report["methods"].push_back(mj);
        for_rank[name] = QualityResult{s_mean, p_mean, n_pairs};
    }
    if (clf) report["classifier_stage"] = clf->stage.to_json();
    if (for_rank.size() >= 2) {
        const MethodRanking ranking = quality_rank(for_rank);
        report["quality_rank"] = ranking.to_json();
        md << "\n" << ranking.to_markdown();
    }
    ensure_dir(ctx.out);
    write_json(ctx.out / "report.json", report);
    write_text(ctx.out / "report.md", md.str());
    json mcfg = {{"data", a.data.string()}, {"split", a.split}, {"runs", a.runs}, {"stage", a.stage},
                 {"classifier", a.classifier.string()}, {"generated", a.generated.string()}, {"methods", a.methods}};
    ctx.manifest("evaluate", mcfg);
    *ctx.log << md.str();
}

// ------------------------------------------------------------------- perturb

struct PerturbArgs {
    fs::path data;
    fs::path classifier;
    std::string stage = "properly_fit";
    std::string split = "test";
    std::string translations = "5,10,15";
    std::string rotations = "5,10,15";
    std::string elastic = "low,medium,high";
    bool strips = false;
};

void cmd_perturb(const Context& ctx, const PerturbArgs& a) {
    BatteryConfig cfg;
    cfg.translations = parse_list<double>(a.translations, "--translations");
    cfg.rotations = parse_list<double>(a.rotations, "--rotations");
    cfg.elastic.clear();
    for (const auto& s : parse_list<std::string>(a.elastic, "--elastic")) cfg.elastic.push_back(parse_elastic_severity(s));
    cfg.seed = ctx.seed;
    const Classifier clf = open_classifier(a.classifier, a.stage);
    const Dataset ds = load_bci(a.data);
    const auto records = select_split(ds, a.split);
    std::vector<Image> ihc;
    std::vector<int> labels;
    for (const auto& p : records) {
        ihc.push_back(p.ihc);
        labels.push_back(clf.label_of(p));
    }
    const PerturbationReport rep = run_battery(ihc, labels, clf, cfg);
    ensure_dir(ctx.out);
    json j = rep.to_json();
    j["classifier_stage"] = clf.stage.to_json();
    j["n_patches"] = ihc.size();
    write_json(ctx.out / "perturbation.json", j);
    write_text(ctx.out / "perturbation.md", rep.to_markdown());
    if (a.strips) {
        // original followed by every perturbed version of the first patch
        std::vector<Perturbation> ps;
        for (double m : cfg.translations) ps.push_back(Perturbation::translate(m));
        for (double m : cfg.rotations) ps.push_back(Perturbation::rotate(m));
        for (auto s : cfg.elastic) ps.push_back(Perturbation::elastic(s, mix_seed(cfg.seed, 0)));
        const Image& src = ihc.front();
        const int w = src.width;
        Image strip(3, src.height, w * static_cast<int>(ps.size() + 1));
        auto blit = [&](const Image& img, int k) {
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < img.height; ++y)
                    for (int x = 0; x < w; ++x) strip.at(c, y, k * w + x) = img.at(c, y, x);
        };
        blit(src, 0);
        for (std::size_t k = 0; k < ps.size(); ++k) blit(apply(src, ps[k]), static_cast<int>(k + 1));
        write_png(ctx.out / ("strip_" + records.front().id + ".png"), strip);
    }
    ctx.manifest("perturb", {{"data", a.data.string()},
                             {"classifier", a.classifier.string()},
                             {"stage", a.stage},
                             {"split", a.split},
                             {"translations", cfg.translations},
                             {"rotations", cfg.rotations},
                             {"elastic", a.elastic},
                             {"strips", a.strips}});
    *ctx.log << rep.to_markdown();
}

// ------------------------------------------------------------------ saliency

struct SaliencyArgs {
    fs::path checkpoint;
    fs::path data;
    std::string split = "test";
    std::string ids;
    int limit = 1;
    std::string timesteps;
    int n_masks = 1000;
    double keep_prob = 0.5;
    int cell = 8;
    std::string fill = "image";
};

void cmd_saliency(const Context& ctx, const SaliencyArgs& a) {
    const DenoiserCheckpoint ck = open_denoiser(a.checkpoint);
    const Dataset ds = load_bci(a.data);
    std::vector<PairedPatch> records;
    if (!a.ids.empty()) {
        for (const auto& id : parse_list<std::string>(a.ids, "--ids")) records.push_back(ds.by_id(id));
    } else {
        records = select_split(ds, a.split);
        if (a.limit > 0 && static_cast<std::size_t>(a.limit) < records.size()) records.resize(static_cast<std::size_t>(a.limit));
    }
    SaliencyOptions opts;
    opts.timesteps = parse_list<int>(a.timesteps, "--timesteps");
    opts.n_masks = a.n_masks;
    opts.keep_prob = a.keep_prob;
    opts.cell = a.cell;
    opts.seed = ctx.seed;
    if (a.fill == "dataset") {
        std::vector<Image> he;
        for (const auto& p : ds.records) he.push_back(p.he);
        opts.fill = mean_color(he);
    } else if (a.fill != "image") {
        fail(ErrorKind::invalid_argument, "--fill must be dataset or image");
    }
    ensure_dir(ctx.out);
    json items = json::array();
    std::ostringstream md;
    md.setf(std::ios::fixed);
    md.precision(4);
    md << "| Patch | Timestep | Mean saliency | Overlay |\n|---|---|---|---|\n";
    for (const auto& p : records) {
        opts.sample_seed = mix_seed(ctx.seed, fnv1a(p.id));
        const SaliencyMap sm = rise_saliency(p.he, ck.pair, ck.schedule, opts);
        write_npy(ctx.out / (p.id + ".npy"), sm);
        json maps = json::array();
        for (std::size_t k = 0; k < sm.maps.size(); ++k) {
            const std::string name = p.id + "_t" + std::to_string(sm.timesteps[k]) + ".png";
            write_png_rgb8(ctx.out / name, heat_overlay(sm.maps[k], p.he), p.he.height, p.he.width);
            double mean = 0.0;
            for (double v : sm.maps[k].data) mean += v;
            mean /= static_cast<double>(sm.maps[k].size());
            maps.push_back({{"timestep", sm.timesteps[k]}, {"overlay", name}, {"mean", mean}});
            md << "| " << p.id << " | " << sm.timesteps[k] << " | " << mean << " | " << name << " |\n";
        }
        items.push_back({{"id", p.id}, {"raw", p.id + ".npy"}, {"maps", maps}});
        *ctx.log << "saliency " << p.id << " done\n";
    }
    write_json(ctx.out / "saliency.json", {{"n_masks", a.n_masks}, {"keep_prob", a.keep_prob}, {"cell", a.cell}, {"patches", items}});
    write_text(ctx.out / "saliency.md", md.str());
    ctx.manifest("saliency", {{"checkpoint", a.checkpoint.string()},
                              {"data", a.data.string()},
                              {"split", a.split},
                              {"ids", a.ids},
                              {"limit", a.limit},
                              {"timesteps", a.timesteps},
                              {"n_masks", a.n_masks},
                              {"keep_prob", a.keep_prob},
                              {"cell", a.cell},
                              {"fill", a.fill}});
}

// ---------------------------------------------------------------- classifier

struct ClassifierArgs {
    fs::path data;
    int epochs = 24;
    int batch_size = 16;
    double lr = 1e-3;
    int width = 8;
    bool four_class = false;
    std::string stage_epochs = "0,0,0";
    std::string train_split = "train";
};

void cmd_classifier(const Context& ctx, const ClassifierArgs& a) {
    ClassifierConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.lr;
    cfg.width = a.width;
    cfg.binarize = !a.four_class;
    cfg.seed = ctx.seed;
    const auto se = parse_list<int>(a.stage_epochs, "--stage-epochs");
    if (se.size() != 3) fail(ErrorKind::invalid_argument, "--stage-epochs needs three values");
    cfg.stage_epochs = {se[0], se[1], se[2]};
    cfg.validate();

    const Dataset ds = load_bci(a.data);
    std::vector<Image> tri, tei;
    std::vector<int> trl, tel;
    for (const auto& p : select_split(ds, a.train_split)) {
        tri.push_back(p.ihc);
        trl.push_back(class_label(p, cfg.binarize));
    }
    for (const auto& p : select_split(ds, "test")) {
        tei.push_back(p.ihc);
        tel.push_back(class_label(p, cfg.binarize));
    }
    const ClassifierTraining tr = train_classifier(tri, trl, tei, tel, cfg);
    ensure_dir(ctx.out);
    json stages = json::array();
    std::ostringstream md;
    md.setf(std::ios::fixed);
    md.precision(4);
    md << "| Stage | Epoch | Train accuracy | Test accuracy | Checkpoint |\n|---|---|---|---|---|\n";
    for (const auto& c : tr.stages) {
        const std::string file = "classifier_" + std::string(to_string(c.stage.stage)) + ".vsta";
        save_classifier(ctx.out / file, c);
        json sj = c.stage.to_json();
        sj["checkpoint"] = file;
        stages.push_back(sj);
        md << "| " << to_string(c.stage.stage) << " | " << c.stage.epoch << " | " << c.stage.train_acc << " | "
           << c.stage.test_acc << " | " << file << " |\n";
    }
    write_text(ctx.out / "curves.csv", tr.curve_csv());
    write_json(ctx.out / "stages.json", {{"stages", stages}, {"config", cfg.to_json()}});
    write_text(ctx.out / "stages.md", md.str());
    json c = cfg.to_json();
    c["data"] = a.data.string();
    c["train_split"] = a.train_split;
    ctx.manifest("classifier", c);
    *ctx.log << md.str();
}

// Extra arguments taken from a JSON config file: top-level keys apply to every
// command, keys under the command's name apply to that command only.
std::vector<std::string> config_args(const fs::path& path, const std::string& command) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::io_error, "cannot read config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::parse_error, "config file '" + path.string() + "': " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::parse_error, "config file must hold a JSON object");
    std::vector<std::string> out;
    auto emit = [&](const std::string& key, const json& v) {
        std::string text;
        if (v.is_string()) text = v.get<std::string>();
        else if (v.is_boolean()) text = v.get<bool>() ? "true" : "false";
        else if (v.is_array()) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) text += ",";
                text += v[i].is_string() ? v[i].get<std::string>() : v[i].dump();
            }
        } else text = v.dump();
        out.push_back("--" + key + "=" + text);
    };
    for (const auto& [k, v] : j.items())
        if (!v.is_object()) emit(k, v);
    if (j.contains(command) && j[command].is_object())
        for (const auto& [k, v] : j[command].items()) emit(k, v);
    return out;
}

void print_error(std::ostream& err, std::string_view kind, const std::string& message) {
    err << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

} // namespace

int run(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args = args_in;
    CLI::App app{"Dual-path diffusion virtual staining: training, sampling and evaluation", "vstain"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    Context ctx;
    ctx.argv = args;
    ctx.log = &out;
    app.add_option("--seed", ctx.seed, "Random seed")->capture_default_str();
    app.add_option("--out", ctx.out, "Output directory");
    app.add_option("--config", ctx.config, "JSON file whose values override command-line flags");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth-data", "Generate a synthetic paired-stain dataset in BCI layout");
    s->add_option("--n", synth.n)->capture_default_str();
    s->add_option("--size", synth.size)->capture_default_str();
    s->add_option("--class-balance,--class_balance", synth.class_balance)->capture_default_str();
    s->add_option("--test-fraction,--test_fraction", synth.test_fraction)->capture_default_str();
    s->add_option("--max-shift,--max_shift", synth.max_shift)->capture_default_str();
    s->add_option("--structure", synth.structure)->capture_default_str();
    s->add_option("--expression-noise,--expression_noise", synth.expression_noise)->capture_default_str();
    s->add_option("--pixel-noise,--pixel_noise", synth.pixel_noise)->capture_default_str();

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train the restoration and noise networks");
    t->add_option("--data", train.data)->required();
    t->add_option("--split", train.split)->capture_default_str();
    t->add_option("--epochs", train.epochs)->capture_default_str();
    t->add_option("--batch-size,--batch_size", train.batch_size)->capture_default_str();
    t->add_option("--lr,--learning-rate,--learning_rate", train.lr)->capture_default_str();
    t->add_option("--T", train.T)->capture_default_str();
    t->add_option("--w-res,--w_res", train.w_res)->capture_default_str();
    t->add_option("--w-eps,--w_eps", train.w_eps)->capture_default_str();
    t->add_option("--width", train.width)->capture_default_str();
    t->add_option("--checkpoint-interval,--checkpoint_interval", train.checkpoint_interval)->capture_default_str();
    t->add_option("--noise-shape,--noise_shape", train.noise_shape)->capture_default_str();
    t->add_option("--restoration-shape,--restoration_shape", train.restoration_shape)->capture_default_str();
    t->add_option("--noise-amplitude,--noise_amplitude", train.noise_amplitude)->capture_default_str();
    t->add_option("--restoration-amplitude,--restoration_amplitude", train.restoration_amplitude)->capture_default_str();
    t->add_option("--orientation", train.orientation)->capture_default_str();

    SampleArgs sample;
    auto* sa = app.add_subcommand("sample", "Generate virtual IHC patches from H&E");
    sa->add_option("--checkpoint", sample.checkpoint)->required();
    sa->add_option("--data", sample.data)->required();
    sa->add_option("--split", sample.split)->capture_default_str();
    sa->add_option("--mask", sample.mask, "both, restoration or noise")->capture_default_str();
    sa->add_option("--runs", sample.runs)->capture_default_str();
    sa->add_option("--limit", sample.limit)->capture_default_str();
    sa->add_option("--T", sample.expect_T, "Expected schedule length; must match the checkpoint");

    EvaluateArgs eval;
    auto* e = app.add_subcommand("evaluate", "Score generated patches: SSIM, PSNR, accuracy, SFS, quality rank");
    e->add_option("--generated", eval.generated);
    e->add_option("--method", eval.methods, "name=dir; repeat for a ranked comparison")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    e->add_option("--data", eval.data)->required();
    e->add_option("--split", eval.split)->capture_default_str();
    e->add_option("--classifier", eval.classifier, "Checkpoint file or classifier output directory");
    e->add_option("--stage", eval.stage)->capture_default_str();
    e->add_option("--runs", eval.runs)->capture_default_str();

    PerturbArgs pert;
    auto* p = app.add_subcommand("perturb", "Spatial perturbation robustness battery");
    p->add_option("--data", pert.data)->required();
    p->add_option("--classifier", pert.classifier)->required();
    p->add_option("--stage", pert.stage)->capture_default_str();
    p->add_option("--split", pert.split)->capture_default_str();
    p->add_option("--translations", pert.translations)->capture_default_str();
    p->add_option("--rotations", pert.rotations)->capture_default_str();
    p->add_option("--elastic", pert.elastic)->capture_default_str();
    p->add_flag("--strips", pert.strips);

    SaliencyArgs sal;
    auto* sl = app.add_subcommand("saliency", "RISE saliency over the denoising trajectory");
    sl->add_option("--checkpoint", sal.checkpoint)->required();
    sl->add_option("--data", sal.data)->required();
    sl->add_option("--split", sal.split)->capture_default_str();
    sl->add_option("--ids", sal.ids);
    sl->add_option("--limit", sal.limit)->capture_default_str();
    sl->add_option("--timesteps", sal.timesteps);
    sl->add_option("--n-masks,--n_masks", sal.n_masks)->capture_default_str();
    sl->add_option("--keep-prob,--keep_prob", sal.keep_prob)->capture_default_str();
    sl->add_option("--cell", sal.cell)->capture_default_str();
    sl->add_option("--fill", sal.fill)->capture_default_str();

    ClassifierArgs cls;
    auto* c = app.add_subcommand("classifier", "Train the HER2 classifier and save staged checkpoints");
    c->add_option("--data", cls.data)->required();
    c->add_option("--epochs", cls.epochs)->capture_default_str();
    c->add_option("--batch-size,--batch_size", cls.batch_size)->capture_default_str();
    c->add_option("--lr,--learning-rate,--learning_rate", cls.lr)->capture_default_str();
    c->add_option("--width", cls.width)->capture_default_str();
    c->add_flag("--four-class,--four_class", cls.four_class);
    c->add_option("--stage-epochs,--stage_epochs", cls.stage_epochs)->capture_default_str();
    c->add_option("--train-split,--train_split", cls.train_split)->capture_default_str();

    try {
        for (std::size_t i = 1; i < args.size(); ++i) {
            std::string cfg_path;
            if (args[i] == "--config" && i + 1 < args.size()) cfg_path = args[i + 1];
            else if (args[i].rfind("--config=", 0) == 0) cfg_path = args[i].substr(9);
            if (cfg_path.empty()) continue;
            std::string command;
            for (const auto& a : args)
                if (app.get_subcommand_no_throw(a) != nullptr) {
                    command = a;
                    break;
                }
            const auto extra = config_args(cfg_path, command);
            args.insert(args.end(), extra.begin(), extra.end());
            break;
        }
        std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
        try {
            app.parse(rev);
        } catch (const CLI::CallForHelp&) {
            out << app.help();
            return 0;
        } catch (const CLI::CallForAllHelp&) {
            out << app.help("", CLI::AppFormatMode::All);
            return 0;
        } catch (const CLI::ParseError& pe) {
            print_error(err, "usage_error", pe.what());
            return 2;
        }
        auto* sub = app.get_subcommands().front();
        if (sub->get_help_ptr() && sub->get_help_ptr()->count() > 0) {
            out << sub->help();
            return 0;
        }
        if (ctx.out.empty()) fail(ErrorKind::invalid_argument, "--out is required");
        const std::string name = sub->get_name();
        if (name == "synth-data") cmd_synth(ctx, synth);
        else if (name == "train") cmd_train(ctx, train);
        else if (name == "sample") cmd_sample(ctx, sample);
        else if (name == "evaluate") cmd_evaluate(ctx, eval);
        else if (name == "perturb") cmd_perturb(ctx, pert);
        else if (name == "saliency") cmd_saliency(ctx, sal);
        else if (name == "classifier") cmd_classifier(ctx, cls);
        return 0;
    } catch (const Error& ex) {
        print_error(err, to_string(ex.kind()), ex.what());
        return 1;
    } catch (const std::filesystem::filesystem_error& ex) {
        print_error(err, "io_error", ex.what());
        return 1;
    } catch (const std::exception& ex) {
        print_error(err, "internal_error", ex.what());
        return 1;
    }
}

} // namespace vstain::cli
