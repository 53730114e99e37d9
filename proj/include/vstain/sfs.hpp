#pragma once

#include "vstain/dataio.hpp"
#include "vstain/image.hpp"
#include "vstain/nn/resnet.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vstain {

struct ClassRecalls {
    std::vector<int> count;         // N_c
    std::vector<int> true_positive; // TP_c
    std::vector<double> recall;     // TP_c / N_c, 0 where N_c = 0

    bool present(int c) const { return count.at(static_cast<std::size_t>(c)) > 0; }
};

ClassRecalls class_recalls(const std::vector<int>& preds, const std::vector<int>& truth, int classes);

enum class FitStage { underfit, properly_fit, overfit };

std::string_view to_string(FitStage s) noexcept;
FitStage parse_fit_stage(std::string_view s);

struct ClassifierStage {
    FitStage stage = FitStage::properly_fit;
    int epoch = 0;
    double train_acc = 0.0;
    double test_acc = 0.0;

    nlohmann::json to_json() const;
};

struct SFSReport {
    int n_classes = 0;
    std::vector<int> counts;
    std::vector<double> recall_real;
    std::vector<double> recall_gen;
    std::vector<bool> included; // classes with N_c > 0
    double avg_deg = 0.0;
    double acc_real = 0.0;
    double acc_gen = 0.0;
    double sfs_raw = 0.0; // (acc_gen + 1 - avg_deg) / 2 before clamping
    double sfs = 0.0;
    std::optional<ClassifierStage> classifier_stage;

    nlohmann::json to_json() const;
};

// Class-wise recall degradation from real to generated predictions, folded
// with generated accuracy into a score in [0, 1].
SFSReport compute_sfs(const std::vector<int>& real_preds, const std::vector<int>& gen_preds,
                      const std::vector<int>& truth, int classes = 2);

struct ClassifierConfig {
    int epochs = 24;
    int batch_size = 16;
    double learning_rate = 1e-3;
    int width = 8;
    bool binarize = true;
    std::uint64_t seed = 0;
    // Underfit / properly-fit / overfit epochs; 0 picks E/3, 2E/3, E.
    std::array<int, 3> stage_epochs{0, 0, 0};
    // The underfit checkpoint must trail the properly-fit test accuracy by at
    // least this much; otherwise the latest earlier epoch that does is used.
    double underfit_gap = 0.1;

    void validate() const;
    std::array<int, 3> resolved_stage_epochs() const;
    nlohmann::json to_json() const;
    static ClassifierConfig from_json(const nlohmann::json& j);
};

class Classifier {
public:
    Classifier() = default;
    Classifier(const nn::ResNetConfig& cfg, bool binarize, std::uint64_t seed);

    int classes() const noexcept { return net.config().classes; }
    bool binarize() const noexcept { return binarize_; }
    bool trained() const noexcept { return trained_; }
    void mark_trained(bool v = true) noexcept { trained_ = v; }

    int label_of(const PairedPatch& p) const noexcept { return class_label(p, binarize_); }
    std::vector<int> predict(const std::vector<Image>& images) const;

    nn::ResNetClassifier net;
    ClassifierStage stage;

private:
    bool binarize_ = true;
    bool trained_ = false;
};

struct CurvePoint {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

struct ClassifierTraining {
    std::array<Classifier, 3> stages; // underfit, properly-fit, overfit
    std::vector<CurvePoint> curve;    // epoch 0 is the untrained model
    ClassifierConfig config;

    const Classifier& stage(FitStage s) const { return stages[static_cast<std::size_t>(s)]; }
    std::string curve_csv() const;
};

double accuracy(const std::vector<int>& preds, const std::vector<int>& truth);

ClassifierTraining train_classifier(const std::vector<Image>& train_images, const std::vector<int>& train_labels,
                                    const std::vector<Image>& test_images, const std::vector<int>& test_labels,
                                    const ClassifierConfig& cfg);

void save_classifier(const std::filesystem::path& path, const Classifier& clf);
Classifier load_classifier(const std::filesystem::path& path);

struct StageRow {
    ClassifierStage stage;
    double accuracy = 0.0; // on the generated set
    double sfs = 0.0;
    SFSReport report;
};

struct StageRobustness {
    std::vector<StageRow> rows;
    double accuracy_range = 0.0;
    double sfs_range = 0.0;

    nlohmann::json to_json() const;
    std::string to_markdown() const;
};

// Scores one generated set against its paired real set under every classifier.
StageRobustness stage_robustness(const std::vector<Image>& generated, const std::vector<Image>& real,
                                 const std::vector<int>& truth, const std::vector<const Classifier*>& stages);

} // namespace vstain
