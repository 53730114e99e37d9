#pragma once

#include "vstain/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vstain {

// HER2 score 0, 1+, 2+, 3+ stored as 0..3.
int parse_her2_label(std::string_view token);
std::string her2_token(int her2);

// Positive iff the score is 2+ or 3+.
constexpr bool her2_positive(int her2) noexcept { return her2 >= 2; }

struct PairedPatch {
    std::string id;
    Image he;
    Image ihc;
    int her2 = 0;

    bool binary_label() const noexcept { return her2_positive(her2); }
};

// Class index used by the classifier: binary (0 = negative, 1 = positive) or the raw 4-way score.
int class_label(const PairedPatch& p, bool binarize) noexcept;

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
    double val_fraction = 0.2;
};

struct Dataset {
    std::vector<PairedPatch> records; // sorted by id
    DatasetSplit split;

    // Records whose ids appear in `ids`, in `ids` order.
    std::vector<PairedPatch> subset(const std::vector<std::string>& ids) const;
    const PairedPatch& by_id(const std::string& id) const;
};

/// Reads a BCI-style directory:
///
///   root/HE/<split>/<id>.png   root/IHC/<split>/<id>.png   root/labels.csv
///
/// `<split>` is `train` or `test`; a flat layout (images directly under HE/
/// and IHC/) is read as a test-only set. labels.csv has an `id,her2` header;
/// without it the label is the token after the last '_' in the file stem, as
/// in the public BCI release. `val_fraction` of the train ids (seeded
/// shuffle) is held out as validation.
Dataset load_bci(const std::filesystem::path& root, double val_fraction = 0.2, std::uint64_t split_seed = 0);

// Writes records in the layout read by load_bci. Records listed in neither
// split list are written to train.
void write_bci(const std::filesystem::path& root, const std::vector<PairedPatch>& records,
               const std::vector<std::string>& test_ids);

enum class SynthStructure { blobs, single_blob };

struct SynthOptions {
    SynthStructure structure = SynthStructure::blobs;
    int max_shift = 0;          // random misalignment of the IHC rendering, pixels
    double expression_noise = 0.3;
    double pixel_noise = 0.02;
};

struct SynthPatch {
    PairedPatch patch;
    Image tissue_mask; // 1 x H x W soft mask of the H&E structure, [0, 1]
    double expression = 0.0;
};

// One synthetic record; the he and ihc renders share a structure mask.
SynthPatch synth_patch(const std::string& id, int size, int her2, std::uint64_t seed, const SynthOptions& opts = {});

std::vector<PairedPatch> synth_dataset(int n, int size, const std::array<double, 4>& class_balance, std::uint64_t seed,
                                       const SynthOptions& opts = {});

// Mean (R - B) over the image in unit range; grows with DAB (brown) stain.
double brown_intensity(const Image& img);

// Per-channel mean color over a set of images.
std::vector<double> mean_color(const std::vector<Image>& images);

std::vector<std::string> split_test_ids(const std::vector<PairedPatch>& records, double test_fraction, std::uint64_t seed);

} // namespace vstain
