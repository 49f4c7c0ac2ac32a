#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "cigan/core/image.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/data/manifest.hpp"
#include "cigan/data/patch.hpp"

namespace cigan {

// Procedurally generated stand-in dataset: smooth low-frequency tissue
// backgrounds in [0.2, 0.8] with optional bright elliptical blobs and exact
// ground-truth masks. round(n * lesion_rate) images receive 1-3 blobs.
struct PhantomImage {
    std::string id;
    Tensor<float> image;
    Mask lesion_mask; // all-zero when the image has no lesion
};

struct PhantomSet {
    std::vector<PhantomImage> images;
    DatasetManifest manifest; // paths are archive-relative, filled before writing
};

namespace detail {

inline Tensor<float> phantom_background(int h, int w, Rng& rng) {
    // Bilinearly upsampled coarse uniform grid; interpolation keeps values
    // inside the coarse grid's range.
    const int cell = 16;
    const int gh = (h + cell - 1) / cell + 1;
    const int gw = (w + cell - 1) / cell + 1;
    Tensor<float> grid({gh, gw});
    for (auto& v : grid) v = static_cast<float>(rng.uniform());
    Tensor<float> img({h, w});
    for (int r = 0; r < h; ++r) {
        const double gy = static_cast<double>(r) / cell;
        const int y0 = static_cast<int>(gy);
        const double wy = gy - y0;
        for (int c = 0; c < w; ++c) {
            const double gx = static_cast<double>(c) / cell;
            const int x0 = static_cast<int>(gx);
            const double wx = gx - x0;
            const double top = (1 - wx) * grid.at(y0, x0) + wx * grid.at(y0, x0 + 1);
            const double bot = (1 - wx) * grid.at(y0 + 1, x0) + wx * grid.at(y0 + 1, x0 + 1);
            const double v = (1 - wy) * top + wy * bot;
            img.at(r, c) = static_cast<float>(0.2 + 0.6 * v);
        }
    }
    return img;
}

inline void add_phantom_lesion(Tensor<float>& img, Mask& mask, Rng& rng) {
    const int h = img.dim(0), w = img.dim(1);
    const double min_dim = std::min(h, w);
    const double ra = rng.uniform(0.06, 0.14) * min_dim;
    const double rb = rng.uniform(0.06, 0.14) * min_dim;
    const double theta = rng.uniform(0.0, M_PI);
    const double margin = std::max(ra, rb) + 1.0;
    const double cy = rng.uniform(margin, h - 1 - margin);
    const double cx = rng.uniform(margin, w - 1 - margin);
    const double amp = rng.uniform(0.15, 0.3);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double dy = r - cy, dx = c - cx;
            const double u = (ct * dx + st * dy) / ra;
            const double v = (-st * dx + ct * dy) / rb;
            const double rho2 = u * u + v * v;
            if (rho2 >= 1.0) continue;
            mask.at(r, c) = 1;
            // Parabolic falloff: full amplitude at the center, soft edge.
            const float add = static_cast<float>(amp * (1.0 - rho2));
            img.at(r, c) = std::min(1.0f, img.at(r, c) + add);
        }
    }
}

} // namespace detail

inline PhantomSet make_phantom_dataset(int n_images, int height, int width, double lesion_rate,
                                       std::uint64_t seed,
                                       std::array<double, 3> fractions = {0.8, 0.1, 0.1}) {
    if (n_images < 1) throw InvalidInputError("make_phantom_dataset: n_images must be >= 1");
    if (height < 8 || width < 8)
        throw InvalidInputError("make_phantom_dataset: image size too small");
    if (lesion_rate < 0.0 || lesion_rate > 1.0)
        throw InvalidInputError("make_phantom_dataset: lesion_rate must be in [0,1]");

    // Deterministic lesion count; which images get lesions comes from a
    // seeded permutation.
    const int n_lesion = static_cast<int>(std::lround(lesion_rate * n_images));
    std::vector<int> order(static_cast<std::size_t>(n_images));
    for (int i = 0; i < n_images; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng perm_rng(derive_seed(seed, "lesion-assign"));
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[perm_rng.uniform_int(i)]);
    std::vector<bool> has_lesion(static_cast<std::size_t>(n_images), false);
    for (int i = 0; i < n_lesion; ++i) has_lesion[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

    PhantomSet set;
    std::vector<ManifestRecord> records;
    for (int i = 0; i < n_images; ++i) {
        Rng rng(derive_seed(seed, "phantom", static_cast<std::uint64_t>(i)));
        PhantomImage ph;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "phantom_%04d", i);
        ph.id = buf;
        ph.image = detail::phantom_background(height, width, rng);
        ph.lesion_mask = Mask({height, width});
        if (has_lesion[static_cast<std::size_t>(i)]) {
            const int blobs = 1 + static_cast<int>(rng.uniform_int(3));
            for (int b = 0; b < blobs; ++b)
                detail::add_phantom_lesion(ph.image, ph.lesion_mask, rng);
        }
        ManifestRecord rec;
        rec.id = ph.id;
        rec.path = "images/" + ph.id + ".png";
        rec.mask_path = has_lesion[static_cast<std::size_t>(i)]
                            ? std::optional<std::string>("masks/" + ph.id + ".png")
                            : std::nullopt;
        rec.label = has_lesion[static_cast<std::size_t>(i)] ? LesionClass::malignant
                                                            : LesionClass::non_malignant;
        records.push_back(std::move(rec));
        set.images.push_back(std::move(ph));
    }
    set.manifest = build_manifest(std::move(records), seed, fractions);
    return set;
}

} // namespace cigan
