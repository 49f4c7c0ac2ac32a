#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "cigan/data/archive.hpp"
#include "cigan/data/manifest.hpp"
#include "cigan/data/patch.hpp"
#include "cigan/data/phantom.hpp"
#include "cigan/data/sampling.hpp"

using namespace cigan;
namespace fs = std::filesystem;

TEST_CASE("make_corrupted replaces exactly the masked pixels") {
    Rng rng(2);
    Tensor<float> img({32, 32});
    for (auto& v : img) v = static_cast<float>(rng.uniform());
    Mask zero({32, 32});
    const auto same = make_corrupted(img, zero, 9);
    CHECK(max_abs_diff(same, img) == 0.0f);

    Mask all({32, 32});
    all.fill(1);
    const auto noise = make_corrupted(img, all, 9);
    for (float v : noise) {
        CHECK(v >= 0.0f);
        CHECK(v < 1.0f);
    }
    const auto noise2 = make_corrupted(img, all, 9);
    CHECK(max_abs_diff(noise, noise2) == 0.0f);

    // Exactly 100 masked pixels: positional diff must match the mask.
    Mask hundred({32, 32});
    Rng pos_rng(3);
    std::set<std::size_t> positions;
    while (positions.size() < 100) positions.insert(pos_rng.uniform_int(hundred.size()));
    for (auto p : positions) hundred[p] = 1;
    const auto partial = make_corrupted(img, hundred, 4);
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (hundred[i]) continue; // noise may collide with the source only by chance
        CHECK(partial[i] == img[i]);
    }
    std::size_t differing = 0;
    for (std::size_t i = 0; i < img.size(); ++i)
        if (partial[i] != img[i]) ++differing;
    CHECK(differing <= 100);
    CHECK(differing >= 95); // collisions are measure-zero-rare

    Mask wrong({16, 16});
    CHECK_THROWS_AS(make_corrupted(img, wrong, 1), InvalidInputError);
}

TEST_CASE("conditioned input has the documented channel layout") {
    Rng rng(5);
    Patch patch;
    patch.image = Tensor<float>({64, 64});
    for (auto& v : patch.image) v = static_cast<float>(rng.uniform());
    patch.mask = Mask({64, 64});
    for (int r = 20; r < 30; ++r)
        for (int c = 12; c < 40; ++c)
            patch.mask.at(r, c) = 1;

    const auto input =
        build_conditioned_input(patch, patch.mask, LesionClass::non_malignant, 11);
    REQUIRE(input.channels.shape() == std::vector<int>{4, 64, 64});
    for (int r = 0; r < 64; ++r) {
        for (int c = 0; c < 64; ++c) {
            CHECK(input.channels.at(1, r, c) == static_cast<float>(patch.mask.at(r, c)));
            CHECK(input.channels.at(2, r, c) == 1.0f);
            CHECK(input.channels.at(3, r, c) == 0.0f);
            if (patch.mask.at(r, c)) {
                CHECK(input.channels.at(0, r, c) >= 0.0f);
                CHECK(input.channels.at(0, r, c) < 1.0f);
            } else {
                CHECK(input.channels.at(0, r, c) == patch.image.at(r, c));
            }
        }
    }

    const auto mal = build_conditioned_input(patch, patch.mask, LesionClass::malignant, 11);
    CHECK(mal.channels.at(2, 0, 0) == 0.0f);
    CHECK(mal.channels.at(3, 0, 0) == 1.0f);

    Mask empty({64, 64});
    const auto plain = build_conditioned_input(patch, empty, LesionClass::malignant, 11);
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c)
            CHECK(plain.channels.at(0, r, c) == patch.image.at(r, c));
}

TEST_CASE("phantom dataset is deterministic with the stated composition") {
    const PhantomSet a = make_phantom_dataset(10, 96, 96, 0.5, 1);
    const PhantomSet b = make_phantom_dataset(10, 96, 96, 0.5, 1);
    REQUIRE(a.images.size() == 10);

    std::size_t with_lesion = 0;
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        CHECK(all_in_unit_range(a.images[i].image));
        CHECK(max_abs_diff(a.images[i].image, b.images[i].image) == 0.0f);
        if (mask_popcount(a.images[i].lesion_mask) > 0) ++with_lesion;
    }
    CHECK(with_lesion == 5); // round(10 * 0.5)

    CHECK(a.manifest.count(Split::train) == 8);
    CHECK(a.manifest.count(Split::val) == 1);
    CHECK(a.manifest.count(Split::test) == 1);
    for (std::size_t i = 0; i < a.manifest.records.size(); ++i)
        CHECK(a.manifest.records[i].split == b.manifest.records[i].split);

    const PhantomSet none = make_phantom_dataset(6, 64, 64, 0.0, 2);
    for (const auto& img : none.images) CHECK(mask_popcount(img.lesion_mask) == 0);
    for (const auto& rec : none.manifest.records)
        CHECK(rec.label == LesionClass::non_malignant);
}

TEST_CASE("phantom backgrounds stay in the tissue band") {
    const PhantomSet set = make_phantom_dataset(3, 80, 72, 0.0, 7);
    for (const auto& img : set.images) {
        for (float v : img.image) {
            CHECK(v >= 0.2f);
            CHECK(v <= 0.8f);
        }
    }
}

TEST_CASE("build_manifest splits stratified within one record") {
    std::vector<ManifestRecord> records;
    for (int i = 0; i < 100; ++i) {
        ManifestRecord r;
        r.id = "r" + std::to_string(i);
        r.label = LesionClass::non_malignant;
        records.push_back(r);
    }
    const auto m = build_manifest(records, 3);
    CHECK(m.count(Split::train) == 80);
    CHECK(m.count(Split::val) == 10);
    CHECK(m.count(Split::test) == 10);

    records.resize(10);
    const auto m10 = build_manifest(records, 3);
    CHECK(m10.count(Split::train) == 8);
    CHECK(m10.count(Split::val) == 1);
    CHECK(m10.count(Split::test) == 1);

    CHECK_THROWS_AS(build_manifest({}, 1), InvalidInputError);
}

TEST_CASE("build_manifest handles the 10,480 / 1,832 composition") {
    std::vector<ManifestRecord> records;
    for (int i = 0; i < 10480; ++i) {
        ManifestRecord r;
        r.id = "r" + std::to_string(i);
        r.label = i < 1832 ? LesionClass::malignant : LesionClass::non_malignant;
        records.push_back(r);
    }
    const auto m = build_manifest(records, 11);
    std::array<std::size_t, 3> mal{};
    for (const auto& r : m.records)
        if (r.label == LesionClass::malignant) mal[static_cast<std::size_t>(r.split)] += 1;
    const bool option_a = mal == std::array<std::size_t, 3>{1465, 183, 184};
    const bool option_b = mal == std::array<std::size_t, 3>{1466, 183, 183};
    CHECK((option_a || option_b));
    CHECK(mal[0] + mal[1] + mal[2] == 1832);

    // Same seed reproduces the identical assignment.
    const auto m2 = build_manifest(records, 11);
    for (std::size_t i = 0; i < m.records.size(); ++i)
        CHECK(m.records[i].split == m2.records[i].split);
}

TEST_CASE("build_manifest respects per-class fractions within one record") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform_int(200));
        std::vector<ManifestRecord> records;
        int n_mal = 0;
        for (int i = 0; i < n; ++i) {
            ManifestRecord r;
            r.id = "r" + std::to_string(i);
            r.label = rng.bernoulli(0.3) ? LesionClass::malignant : LesionClass::non_malignant;
            n_mal += r.label == LesionClass::malignant;
            records.push_back(r);
        }
        const auto m = build_manifest(records, static_cast<std::uint64_t>(trial));
        std::array<std::array<double, 3>, 2> counts{};
        for (const auto& r : m.records)
            counts[static_cast<std::size_t>(r.label)][static_cast<std::size_t>(r.split)] += 1;
        const std::array<double, 3> fr{0.8, 0.1, 0.1};
        for (int cls = 0; cls < 2; ++cls) {
            const double total = counts[static_cast<std::size_t>(cls)][0] +
                                 counts[static_cast<std::size_t>(cls)][1] +
                                 counts[static_cast<std::size_t>(cls)][2];
            for (int s = 0; s < 3; ++s) {
                CHECK(std::abs(counts[static_cast<std::size_t>(cls)][static_cast<std::size_t>(s)] -
                               fr[static_cast<std::size_t>(s)] * total) <= 1.0 + 1e-9);
            }
        }
    }
}

TEST_CASE("manifest JSONL round trip") {
    const fs::path dir = fs::temp_directory_path() / "cigan_test_pipeline";
    fs::create_directories(dir);
    const PhantomSet set = make_phantom_dataset(8, 64, 64, 0.5, 21);
    const std::string path = (dir / "manifest.jsonl").string();
    write_manifest(path, set.manifest);
    const DatasetManifest back = read_manifest(path);
    CHECK(back.seed == set.manifest.seed);
    CHECK(back.split_fractions == set.manifest.split_fractions);
    REQUIRE(back.records.size() == set.manifest.records.size());
    for (std::size_t i = 0; i < back.records.size(); ++i) {
        CHECK(back.records[i].id == set.manifest.records[i].id);
        CHECK(back.records[i].path == set.manifest.records[i].path);
        CHECK(back.records[i].mask_path == set.manifest.records[i].mask_path);
        CHECK(back.records[i].label == set.manifest.records[i].label);
        CHECK(back.records[i].split == set.manifest.records[i].split);
    }
}

TEST_CASE("sample_patches starves on an all-black image") {
    Tensor<float> black({512, 512}, 0.0f);
    CHECK_THROWS_WITH(sample_patches(black, {}, 5, 1, "black_img"),
                      Catch::Matchers::ContainsSubstring("black_img"));
}

TEST_CASE("sample_patches accepts everything on a uniform phantom") {
    Tensor<float> uniform({400, 400}, 0.5f);
    SamplingOptions opts;
    opts.patch_size = 256;
    const auto patches = sample_patches(uniform, {}, 10, 7, "uniform", opts);
    REQUIRE(patches.size() == 10);
    const auto again = sample_patches(uniform, {}, 10, 7, "uniform", opts);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        CHECK(max_abs_diff(patches[i].image, again[i].image) == 0.0f);
        CHECK(patches[i].label == LesionClass::non_malignant);
        CHECK(mask_popcount(patches[i].mask) == 0);
    }
}

TEST_CASE("sample_patches labels match brute-force mask overlap") {
    const PhantomSet set = make_phantom_dataset(1, 128, 128, 1.0, 3);
    const Tensor<float>& image = set.images[0].image;
    const Mask& lesion = set.images[0].lesion_mask;
    REQUIRE(mask_popcount(lesion) > 0);

    SamplingOptions opts;
    opts.patch_size = 64;
    std::vector<Annotation> annotations{{lesion, LesionClass::malignant}};
    const auto patches = sample_patches(image, annotations, 50, 3, "ph0", opts);
    REQUIRE(patches.size() == 50);

    // Recover each patch's window by matching the crop; the uniform draw
    // sequence is reproducible with the same derived stream.
    Rng rng(derive_seed(3, "sample", fnv1a64("ph0")));
    std::size_t matched = 0;
    std::size_t next = 0;
    while (next < patches.size()) {
        const int r0 = static_cast<int>(rng.uniform_int(128 - 64 + 1));
        const int c0 = static_cast<int>(rng.uniform_int(128 - 64 + 1));
        Tensor<float> window = crop(image, r0, c0, 64, 64);
        if (tissue_fraction(window, opts.tissue_threshold) <= opts.min_tissue) continue;
        const Patch& p = patches[next];
        REQUIRE(max_abs_diff(window, p.image) == 0.0f);
        std::size_t overlap = 0;
        for (int r = 0; r < 64; ++r)
            for (int c = 0; c < 64; ++c)
                if (lesion.at(r0 + r, c0 + c)) ++overlap;
        if (overlap > 0) {
            CHECK(p.label == LesionClass::malignant);
            CHECK(mask_popcount(p.mask) == overlap);
        } else {
            CHECK(p.label == LesionClass::non_malignant);
            CHECK(mask_popcount(p.mask) == 0);
        }
        ++matched;
        ++next;
    }
    CHECK(matched == 50);
}

TEST_CASE("accepted patches always satisfy the tissue rule") {
    // Harder threshold so acceptance actually filters.
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const PhantomSet set = make_phantom_dataset(1, 160, 160, 0.5, seed + 40);
        SamplingOptions opts;
        opts.patch_size = 64;
        opts.tissue_threshold = 0.45;
        opts.attempt_cap = 4000;
        std::vector<Patch> patches;
        try {
            patches = sample_patches(set.images[0].image, {}, 30, seed, "p", opts);
        } catch (const DataError&) {
            continue; // starvation is a legal outcome on dark phantoms
        }
        for (const auto& p : patches)
            CHECK(tissue_fraction(p.image, opts.tissue_threshold) > opts.min_tissue);
    }
}

TEST_CASE("patch archive round trips through 16-bit PNGs") {
    const fs::path dir = fs::temp_directory_path() / "cigan_test_pipeline" / "archive";
    fs::remove_all(dir);
    const PhantomSet set = make_phantom_dataset(2, 96, 96, 1.0, 13);
    SamplingOptions opts;
    opts.patch_size = 64;
    std::vector<ArchivePatch> patches;
    for (const auto& ph : set.images) {
        std::vector<Annotation> ann{{ph.lesion_mask, LesionClass::malignant}};
        for (auto& p : sample_patches(ph.image, ann, 3, 5, ph.id, opts)) {
            ArchivePatch ap;
            // Quantize to the PNG grid up front so the round trip is exact.
            for (auto& v : p.image)
                v = static_cast<float>(std::lround(v * 65535.0f) / 65535.0);
            ap.patch = std::move(p);
            ap.split = Split::train;
            patches.push_back(std::move(ap));
        }
    }
    write_patch_archive(dir.string(), patches, 13);
    const auto back = read_patch_archive(dir.string());
    REQUIRE(back.size() == patches.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(max_abs_diff(back[i].patch.image, patches[i].patch.image) == 0.0f);
        CHECK(back[i].patch.label == patches[i].patch.label);
        for (std::size_t j = 0; j < back[i].patch.mask.size(); ++j)
            REQUIRE(back[i].patch.mask[j] == patches[i].patch.mask[j]);
    }
}
