#include "vstain/sfs.hpp"

#include "vstain/archive.hpp"
#include "vstain/errors.hpp"
#include "vstain/nn/adam.hpp"
#include "vstain/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace vstain {

namespace {

void check_labels(const std::vector<int>& labels, int classes, const char* what) {
    for (int v : labels)
        if (v < 0 || v >= classes)
            fail(ErrorKind::invalid_argument,
                 std::string(what) + ": label " + std::to_string(v) + " outside [0, " + std::to_string(classes) + ")");
}

nn::Tensor batch_tensor(const std::vector<Image>& images, const std::size_t* idx, std::size_t n) {
    const Image& ref = images[idx[0]];
    nn::Tensor t(static_cast<int>(n), ref.channels, ref.height, ref.width);
    for (std::size_t i = 0; i < n; ++i) {
        const Image& img = images[idx[i]];
        require(img.same_shape(ref), "classifier: images differ in shape");
        float* dst = t.sample(static_cast<int>(i));
        for (std::size_t j = 0; j < img.size(); ++j) dst[j] = static_cast<float>(img.data[j]);
    }
    return t;
}

constexpr std::size_t kInferenceBatch = 32;

} // namespace

ClassRecalls class_recalls(const std::vector<int>& preds, const std::vector<int>& truth, int classes) {
    if (preds.size() != truth.size())
        fail(ErrorKind::invalid_argument, "class_recalls: " + std::to_string(preds.size()) + " predictions vs " +
                                              std::to_string(truth.size()) + " labels");
    require(classes >= 1, "class_recalls: classes must be >= 1");
    check_labels(preds, classes, "class_recalls");
    check_labels(truth, classes, "class_recalls");
    ClassRecalls r;
    r.count.assign(static_cast<std::size_t>(classes), 0);
    r.true_positive.assign(static_cast<std::size_t>(classes), 0);
    r.recall.assign(static_cast<std::size_t>(classes), 0.0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto c = static_cast<std::size_t>(truth[i]);
        ++r.count[c];
        if (preds[i] == truth[i]) ++r.true_positive[c];
    }
    for (std::size_t c = 0; c < r.count.size(); ++c)
        if (r.count[c] > 0) r.recall[c] = static_cast<double>(r.true_positive[c]) / r.count[c];
    return r;
}

std::string_view to_string(FitStage s) noexcept {
    switch (s) {
    case FitStage::underfit: return "underfit";
    case FitStage::properly_fit: return "properly_fit";
    case FitStage::overfit: return "overfit";
    }
    return "?";
}

FitStage parse_fit_stage(std::string_view s) {
    if (s == "underfit") return FitStage::underfit;
    if (s == "properly_fit" || s == "properly-fit" || s == "proper") return FitStage::properly_fit;
    if (s == "overfit") return FitStage::overfit;
    fail(ErrorKind::parse_error, "unknown classifier stage '" + std::string(s) + "'");
}

nlohmann::json ClassifierStage::to_json() const {
    return {{"stage", std::string(to_string(stage))}, {"epoch", epoch}, {"train_acc", train_acc}, {"test_acc", test_acc}};
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& truth) {
    require(preds.size() == truth.size(), "accuracy: length mismatch");
    require(!truth.empty(), "accuracy: empty input");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += preds[i] == truth[i];
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

SFSReport compute_sfs(const std::vector<int>& real_preds, const std::vector<int>& gen_preds,
                      const std::vector<int>& truth, int classes) {
    if (real_preds.size() != truth.size() || gen_preds.size() != truth.size())
        fail(ErrorKind::invalid_argument, "compute_sfs: real, generated and truth sequences must have equal length");
    require(!truth.empty(), "compute_sfs: empty input");
    const ClassRecalls real = class_recalls(real_preds, truth, classes);
    const ClassRecalls gen = class_recalls(gen_preds, truth, classes);

    SFSReport rep;
    rep.n_classes = classes;
    rep.counts = real.count;
    rep.recall_real = real.recall;
    rep.recall_gen = gen.recall;
    rep.included.assign(static_cast<std::size_t>(classes), false);
    double deg = 0.0;
    int included = 0;
    for (int c = 0; c < classes; ++c) {
        if (!real.present(c)) continue;
        rep.included[static_cast<std::size_t>(c)] = true;
        deg += real.recall[static_cast<std::size_t>(c)] - gen.recall[static_cast<std::size_t>(c)];
        ++included;
    }
    rep.avg_deg = deg / included;
    rep.acc_real = accuracy(real_preds, truth);
    rep.acc_gen = accuracy(gen_preds, truth);
    rep.sfs_raw = (rep.acc_gen + (1.0 - rep.avg_deg)) / 2.0;
    rep.sfs = std::clamp(rep.sfs_raw, 0.0, 1.0);
    return rep;
}

nlohmann::json SFSReport::to_json() const {
    nlohmann::json j = {{"n_classes", n_classes}, {"counts", counts},   {"recall_real", recall_real},
                        {"recall_gen", recall_gen}, {"included", included}, {"avg_deg", avg_deg},
                        {"acc_real", acc_real},   {"acc_gen", acc_gen}, {"sfs_raw", sfs_raw},
                        {"sfs", sfs}};
    if (classifier_stage) j["classifier_stage"] = classifier_stage->to_json();
    return j;
}

void ClassifierConfig::validate() const {
    require(epochs >= 3, "classifier config: epochs must be >= 3");
    require(batch_size >= 1, "classifier config: batch_size must be >= 1");
    require(learning_rate > 0.0, "classifier config: learning_rate must be > 0");
    require(width >= 1, "classifier config: width must be >= 1");
    require(underfit_gap >= 0.0 && underfit_gap < 1.0, "classifier config: underfit_gap must be in [0, 1)");
    const auto e = resolved_stage_epochs();
    require(e[0] >= 1 && e[0] < e[1] && e[1] < e[2] && e[2] <= epochs,
            "classifier config: stage epochs must satisfy 1 <= underfit < properly-fit < overfit <= epochs");
}

std::array<int, 3> ClassifierConfig::resolved_stage_epochs() const {
    std::array<int, 3> e = stage_epochs;
    if (e[0] == 0) e[0] = std::max(1, epochs / 3);
    if (e[1] == 0) e[1] = std::max(e[0] + 1, (2 * epochs) / 3);
    if (e[2] == 0) e[2] = epochs;
    return e;
}

nlohmann::json ClassifierConfig::to_json() const {
    return {{"epochs", epochs}, {"batch_size", batch_size}, {"learning_rate", learning_rate}, {"width", width},
            {"binarize", binarize}, {"seed", seed}, {"stage_epochs", resolved_stage_epochs()},
            {"underfit_gap", underfit_gap}};
}

ClassifierConfig ClassifierConfig::from_json(const nlohmann::json& j) {
    ClassifierConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.width = j.value("width", c.width);
    c.binarize = j.value("binarize", c.binarize);
    c.seed = j.value("seed", c.seed);
    c.underfit_gap = j.value("underfit_gap", c.underfit_gap);
    if (j.contains("stage_epochs")) c.stage_epochs = j.at("stage_epochs").get<std::array<int, 3>>();
    return c;
}

Classifier::Classifier(const nn::ResNetConfig& cfg, bool binarize, std::uint64_t seed)
    : net(cfg, seed), binarize_(binarize) {}

std::vector<int> Classifier::predict(const std::vector<Image>& images) const {
    std::vector<int> out;
    out.reserve(images.size());
    std::vector<std::size_t> idx(images.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < images.size(); i += kInferenceBatch) {
        const std::size_t n = std::min(kInferenceBatch, images.size() - i);
        const auto pred = net.predict(batch_tensor(images, idx.data() + i, n));
        out.insert(out.end(), pred.begin(), pred.end());
    }
    return out;
}

std::string ClassifierTraining::curve_csv() const {
    std::ostringstream os;
    os << "epoch,train_loss,train_acc,test_acc\n";
    os.precision(8);
    for (const auto& p : curve) os << p.epoch << ',' << p.train_loss << ',' << p.train_acc << ',' << p.test_acc << '\n';
    return os.str();
}

namespace {

std::vector<std::vector<float>> snapshot(const nn::ResNetClassifier& net) {
    std::vector<std::vector<float>> s;
    for (const nn::Param* p : net.params()) s.push_back(p->value);
    return s;
}

void restore(nn::ResNetClassifier& net, const std::vector<std::vector<float>>& s) {
    auto ps = net.params();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = s[i];
}

} // namespace

ClassifierTraining train_classifier(const std::vector<Image>& train_images, const std::vector<int>& train_labels,
                                    const std::vector<Image>& test_images, const std::vector<int>& test_labels,
                                    const ClassifierConfig& cfg) {
    cfg.validate();
    require(train_images.size() == train_labels.size() && test_images.size() == test_labels.size(),
            "train_classifier: image and label counts differ");
    require(!train_images.empty() && !test_images.empty(), "train_classifier: empty train or test set");
    const int classes = cfg.binarize ? 2 : 4;
    check_labels(train_labels, classes, "train_classifier");
    check_labels(test_labels, classes, "train_classifier");
    if (std::all_of(train_labels.begin(), train_labels.end(), [&](int v) { return v == train_labels.front(); }))
        fail(ErrorKind::invalid_argument, "train_classifier: training set contains a single class");

    nn::ResNetConfig net_cfg;
    net_cfg.in_channels = train_images.front().channels;
    net_cfg.classes = classes;
    net_cfg.width = cfg.width;
    Classifier model(net_cfg, cfg.binarize, mix_seed(cfg.seed, 7));

    ClassifierTraining out;
    out.config = cfg;
    std::vector<std::vector<std::vector<float>>> snapshots;

    auto record = [&](int epoch, double loss) {
        CurvePoint p{epoch, loss, accuracy(model.predict(train_images), train_labels),
                     accuracy(model.predict(test_images), test_labels)};
        out.curve.push_back(p);
        snapshots.push_back(snapshot(model.net));
    };

    {
        std::vector<std::size_t> all(train_images.size());
        std::iota(all.begin(), all.end(), 0);
        double loss = 0.0;
        for (std::size_t i = 0; i < all.size(); i += kInferenceBatch) {
            const std::size_t n = std::min(kInferenceBatch, all.size() - i);
            const auto logits = model.net.forward(batch_tensor(train_images, all.data() + i, n));
            std::vector<int> y(train_labels.begin() + static_cast<std::ptrdiff_t>(i),
                               train_labels.begin() + static_cast<std::ptrdiff_t>(i + n));
            loss += nn::softmax_cross_entropy(logits, y, classes, nullptr) * static_cast<double>(n);
        }
        record(0, loss / static_cast<double>(all.size()));
    }

    nn::Adam opt(cfg.learning_rate);
    std::vector<std::size_t> order(train_images.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, 5000 + static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t n = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - i);
            std::vector<int> y(n);
            for (std::size_t k = 0; k < n; ++k) y[k] = train_labels[order[i + k]];
            nn::ResNetClassifier::Cache cache;
            const auto logits = model.net.forward(batch_tensor(train_images, order.data() + i, n), cache);
            std::vector<float> grad;
            const double loss = nn::softmax_cross_entropy(logits, y, classes, &grad);
            if (!std::isfinite(loss))
                fail(ErrorKind::training_failure, "classifier loss diverged at epoch " + std::to_string(epoch));
            model.net.zero_grad();
            model.net.backward(cache, grad);
            opt.step(model.net.params());
            loss_sum += loss * static_cast<double>(n);
        }
        record(epoch, loss_sum / static_cast<double>(order.size()));
    }

    auto e = cfg.resolved_stage_epochs();
    const double proper_acc = out.curve[static_cast<std::size_t>(e[1])].test_acc;
    auto acc_at = [&](int k) { return out.curve[static_cast<std::size_t>(k)].test_acc; };
    auto trails = [&](int k) { return acc_at(k) < proper_acc && acc_at(k) <= proper_acc - cfg.underfit_gap; };
    if (!trails(e[0])) {
        int chosen = -1;
        for (int k = e[1] - 1; k >= 0 && chosen < 0; --k)
            if (trails(k)) chosen = k;
        for (int k = e[1] - 1; k >= 0 && chosen < 0; --k)
            if (acc_at(k) < proper_acc) chosen = k;
        if (chosen < 0)
            fail(ErrorKind::training_failure, "no epoch before the properly-fit stage has lower test accuracy");
        e[0] = chosen;
    }
    for (std::size_t s = 0; s < 3; ++s) {
        Classifier& c = out.stages[s];
        c = model;
        restore(c.net, snapshots[static_cast<std::size_t>(e[s])]);
        const CurvePoint& p = out.curve[static_cast<std::size_t>(e[s])];
        c.stage = {static_cast<FitStage>(s), e[s], p.train_acc, p.test_acc};
        c.mark_trained(true);
    }
    return out;
}

void save_classifier(const std::filesystem::path& path, const Classifier& clf) {
    Archive ar;
    const auto& cfg = clf.net.config();
    ar.meta = {{"kind", "classifier"},
               {"format_version", kArchiveFormatVersion},
               {"network", {{"in_channels", cfg.in_channels}, {"classes", cfg.classes}, {"width", cfg.width}}},
               {"binarize", clf.binarize()},
               {"trained", clf.trained()},
               {"stage", clf.stage.to_json()}};
    for (const nn::Param* p : clf.net.params())
        ar.put_f32(p->name, p->value, std::vector<std::int64_t>(p->shape.begin(), p->shape.end()));
    save_archive(path, ar);
}

Classifier load_classifier(const std::filesystem::path& path) {
    const Archive ar = load_archive(path);
    if (ar.meta.value("kind", "") != "classifier")
        fail(ErrorKind::version_error, "'" + path.string() + "' is not a classifier checkpoint");
    const auto& nj = ar.meta.at("network");
    nn::ResNetConfig cfg;
    cfg.in_channels = nj.at("in_channels");
    cfg.classes = nj.at("classes");
    cfg.width = nj.at("width");
    Classifier clf(cfg, ar.meta.at("binarize").get<bool>(), 0);
    for (nn::Param* p : clf.net.params()) {
        auto v = ar.get_f32(p->name);
        if (v.size() != p->size()) fail(ErrorKind::version_error, "classifier parameter '" + p->name + "' has the wrong size");
        p->value = std::move(v);
    }
    const auto& sj = ar.meta.at("stage");
    clf.stage = {parse_fit_stage(sj.at("stage").get<std::string>()), sj.at("epoch"), sj.at("train_acc"), sj.at("test_acc")};
    clf.mark_trained(ar.meta.value("trained", false));
    return clf;
}

StageRobustness stage_robustness(const std::vector<Image>& generated, const std::vector<Image>& real,
                                 const std::vector<int>& truth, const std::vector<const Classifier*>& stages) {
    if (stages.empty()) fail(ErrorKind::invalid_state, "stage_robustness: no classifier checkpoints given");
    require(generated.size() == real.size() && real.size() == truth.size(), "stage_robustness: set sizes differ");
    StageRobustness out;
    for (const Classifier* c : stages) {
        if (c == nullptr || !c->trained()) fail(ErrorKind::invalid_state, "stage_robustness: missing or untrained checkpoint");
        StageRow row;
        row.stage = c->stage;
        row.report = compute_sfs(c->predict(real), c->predict(generated), truth, c->classes());
        row.report.classifier_stage = c->stage;
        row.accuracy = row.report.acc_gen;
        row.sfs = row.report.sfs;
        out.rows.push_back(std::move(row));
    }
    auto range = [&](auto field) {
        double lo = field(out.rows.front()), hi = lo;
        for (const auto& r : out.rows) {
            lo = std::min(lo, field(r));
            hi = std::max(hi, field(r));
        }
        return hi - lo;
    };
    out.accuracy_range = range([](const StageRow& r) { return r.accuracy; });
    out.sfs_range = range([](const StageRow& r) { return r.sfs; });
    return out;
}

nlohmann::json StageRobustness::to_json() const {
    nlohmann::json rows_j = nlohmann::json::array();
    for (const auto& r : rows)
        rows_j.push_back({{"stage", r.stage.to_json()}, {"accuracy", r.accuracy}, {"sfs", r.sfs}, {"report", r.report.to_json()}});
    return {{"rows", rows_j}, {"accuracy_range", accuracy_range}, {"sfs_range", sfs_range}};
}

std::string StageRobustness::to_markdown() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "| Classifier stage | Epoch | Accuracy | SFS |\n|---|---|---|---|\n";
    for (const auto& r : rows)
        os << "| " << to_string(r.stage.stage) << " | " << r.stage.epoch << " | " << r.accuracy << " | " << r.sfs << " |\n";
    os << "| range | | " << accuracy_range << " | " << sfs_range << " |\n";
    return os.str();
}

} // namespace vstain
