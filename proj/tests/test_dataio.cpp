#include "support.hpp"

#include "vstain/dataio.hpp"
#include "vstain/png_io.hpp"

#include <algorithm>
#include <cmath>

using namespace vstain;

TEST_CASE("HER2 label tokens and binarization") {
    CHECK(parse_her2_label("0") == 0);
    CHECK(parse_her2_label("1+") == 1);
    CHECK(parse_her2_label("2+") == 2);
    CHECK(parse_her2_label("3+") == 3);
    CHECK_ERROR_KIND(parse_her2_label("4+"), ErrorKind::parse_error);
    CHECK_FALSE(her2_positive(0));
    CHECK_FALSE(her2_positive(1));
    CHECK(her2_positive(2));
    CHECK(her2_positive(3));
    for (int s = 0; s < 4; ++s) CHECK(parse_her2_label(her2_token(s)) == s);

    PairedPatch p;
    p.her2 = parse_her2_label("3+");
    CHECK(class_label(p, true) == 1);
    CHECK(class_label(p, false) == 3);
}

TEST_CASE("byte normalization endpoints and round trip") {
    CHECK(normalize_byte(0) == -1.0);
    CHECK(normalize_byte(255) == 1.0);
    CHECK(normalize_byte(128) == doctest::Approx(0.0039).epsilon(0.01));
    for (int v = 0; v < 256; ++v) CHECK(denormalize_value(normalize_byte(static_cast<std::uint8_t>(v))) == v);
    CHECK(denormalize_value(7.0) == 255);
    CHECK(denormalize_value(-7.0) == 0);
}

TEST_CASE("flat BCI fixture loads with labels from file names") {
    const Dataset ds = load_bci(VSTAIN_FIXTURES "/bci_flat");
    REQUIRE(ds.records.size() == 4);
    CHECK(ds.split.test.size() == 4);
    CHECK(ds.split.train.empty());
    CHECK(ds.records[0].id == "00000_train_0");
    for (int i = 0; i < 4; ++i) CHECK(ds.records[static_cast<std::size_t>(i)].her2 == i);
    CHECK(ds.by_id("00003_train_3+").binary_label());
    const Image& he = ds.records[0].he;
    CHECK(he.channels == 3);
    CHECK(he.height == 12);
    CHECK(he.at(0, 0, 0) == 1.0);
    CHECK(he.at(1, 0, 0) == normalize_byte(128));
    CHECK(he.at(2, 0, 0) == -1.0);
    CHECK_ERROR_KIND(ds.by_id("nope"), ErrorKind::missing_pair);
}

TEST_CASE("write_bci and load_bci round trip") {
    const auto dir = test::temp_dir("dataio_roundtrip");
    const auto recs = synth_dataset(10, 16, {0.25, 0.25, 0.25, 0.25}, 3);
    const auto test_ids = split_test_ids(recs, 0.3, 1);
    CHECK(test_ids.size() == 3);
    write_bci(dir, recs, test_ids);
    const Dataset ds = load_bci(dir, 0.25, 9);
    REQUIRE(ds.records.size() == recs.size());
    CHECK(ds.split.test == test_ids);
    CHECK(ds.split.train.size() + ds.split.val.size() == 7);
    CHECK(ds.split.val.size() == 2);
    for (const auto& r : recs) {
        const auto& got = ds.by_id(r.id);
        CHECK(got.her2 == r.her2);
        // PNG stores 8 bits; values come back on the byte grid
        CHECK(max_abs_diff(got.ihc, r.ihc) <= 1.0 / 255.0 + 1e-12);
    }
}

TEST_CASE("orphan patch is a missing pair") {
    const auto dir = test::temp_dir("dataio_orphan");
    const auto recs = synth_dataset(3, 8, {0.25, 0.25, 0.25, 0.25}, 3);
    write_bci(dir, recs, {});
    std::filesystem::remove(dir / "IHC" / "train" / (recs[1].id + ".png"));
    CHECK_ERROR_KIND(load_bci(dir), ErrorKind::missing_pair);
}

TEST_CASE("missing directories and bad labels") {
    const auto dir = test::temp_dir("dataio_bad");
    CHECK_ERROR_KIND(load_bci(dir), ErrorKind::io_error);
    std::filesystem::create_directories(dir / "HE");
    std::filesystem::create_directories(dir / "IHC");
    write_png(dir / "HE" / "a.png", Image(3, 4, 4));
    write_png(dir / "IHC" / "a.png", Image(3, 4, 4));
    CHECK_ERROR_KIND(load_bci(dir), ErrorKind::parse_error);
}

TEST_CASE("synthetic data is deterministic and balanced") {
    const auto a = synth_dataset(40, 16, {0.5, 0.0, 0.0, 0.5}, 11);
    const auto b = synth_dataset(40, 16, {0.5, 0.0, 0.0, 0.5}, 11);
    REQUIRE(a.size() == 40);
    int pos = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].he == b[i].he);
        CHECK(a[i].ihc == b[i].ihc);
        CHECK((a[i].her2 == 0 || a[i].her2 == 3));
        pos += a[i].binary_label();
    }
    CHECK(pos > 10);
    CHECK(pos < 30);
    const auto c = synth_dataset(40, 16, {0.5, 0.0, 0.0, 0.5}, 12);
    CHECK_FALSE(c[0].ihc == a[0].ihc);
    CHECK_ERROR_KIND(synth_dataset(4, 16, {0.5, 0.5, 0.5, 0.5}, 1), ErrorKind::invalid_argument);
}

TEST_CASE("brown stain grows with HER2 score") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        double prev = -1e9;
        for (int s = 0; s < 4; ++s) {
            const double b = brown_intensity(synth_patch("p", 24, s, seed).patch.ihc);
            CHECK(b > prev);
            prev = b;
        }
    }
}

TEST_CASE("he and ihc share structure") {
    SynthOptions opts;
    opts.structure = SynthStructure::single_blob;
    const auto sp = synth_patch("p", 32, 2, 5, opts);
    double in = 0, out = 0;
    int ni = 0, no = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            // tissue darkens the green channel in both stains
            const double g = sp.patch.he.at(1, y, x) + sp.patch.ihc.at(1, y, x);
            if (sp.tissue_mask.at(0, y, x) > 0.5) {
                in += g;
                ++ni;
            } else {
                out += g;
                ++no;
            }
        }
    REQUIRE(ni > 0);
    CHECK(in / ni < out / no - 0.3);
}
