#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/image.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/core/tensor.hpp"
#include "cigan/data/patch.hpp"

namespace cigan {

// Fit-inside resize: scale = min(target_h/h, target_w/w) on both axes,
// bilinear resampling. Never overflows the target box.
inline Tensor<float> resize_to_target(const Tensor<float>& image, int target_h = 1375,
                                      int target_w = 750) {
    require_image2d(image, "resize_to_target");
    if (image.size() == 0) throw InvalidInputError("resize_to_target: empty image");
    const int h = image.dim(0), w = image.dim(1);
    const double scale = std::min(static_cast<double>(target_h) / h,
                                  static_cast<double>(target_w) / w);
    int oh = static_cast<int>(std::lround(h * scale));
    int ow = static_cast<int>(std::lround(w * scale));
    oh = std::max(1, std::min(oh, target_h));
    ow = std::max(1, std::min(ow, target_w));
    if (oh == h && ow == w) return image;
    return bilinear_resize(image, oh, ow);
}

// Fraction of pixels brighter than the tissue threshold.
template <typename T>
double tissue_fraction(const Tensor<T>& pixels, double threshold = 0.05) {
    if (pixels.size() == 0) throw InvalidInputError("tissue_fraction: empty input");
    std::size_t n = 0;
    for (const T& v : pixels)
        if (static_cast<double>(v) > threshold) ++n;
    return static_cast<double>(n) / static_cast<double>(pixels.size());
}

// A full-image lesion annotation: binary mask in image coordinates.
struct Annotation {
    Mask mask;
    LesionClass label = LesionClass::malignant;
};

struct SamplingOptions {
    int patch_size = 256;
    double tissue_threshold = 0.05;
    double min_tissue = 0.75;
    double min_overlap_fraction = 0.0; // of the lesion area inside the window
    std::size_t attempt_cap = 0;       // 0 -> max(2000, 400 * count)
};

// Rejection-samples square windows, accepting those with more than
// `min_tissue` tissue. A patch is malignant iff a malignant annotation
// overlaps the window (beyond min_overlap_fraction of that annotation's
// area); its mask is the union of malignant annotations cropped to the
// window.
inline std::vector<Patch> sample_patches(const Tensor<float>& image,
                                         const std::vector<Annotation>& annotations,
                                         std::size_t count, std::uint64_t rng_seed,
                                         const std::string& image_id = "image",
                                         const SamplingOptions& opts = {},
                                         std::size_t* attempts_out = nullptr) {
    require_image2d(image, "sample_patches");
    const int ps = opts.patch_size;
    const int h = image.dim(0), w = image.dim(1);
    for (const auto& a : annotations) {
        require_binary_mask(a.mask, "sample_patches annotation");
        if (a.mask.dim(0) != h || a.mask.dim(1) != w)
            throw InvalidInputError("sample_patches: annotation dims do not match image");
    }
    std::vector<Patch> out;
    if (count == 0) return out;
    if (h < ps || w < ps)
        throw DataError("patch sampling starved on " + image_id + ": image smaller than patch");

    const std::size_t cap = opts.attempt_cap ? opts.attempt_cap
                                             : std::max<std::size_t>(2000, 400 * count);
    std::vector<std::size_t> annotation_area(annotations.size(), 0);
    for (std::size_t i = 0; i < annotations.size(); ++i)
        annotation_area[i] = mask_popcount(annotations[i].mask);

    Rng rng(derive_seed(rng_seed, "sample", fnv1a64(image_id)));
    std::size_t attempts = 0;
    while (out.size() < count && attempts < cap) {
        ++attempts;
        const int r0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(h - ps + 1)));
        const int c0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(w - ps + 1)));
        Tensor<float> window = crop(image, r0, c0, ps, ps);
        if (tissue_fraction(window, opts.tissue_threshold) <= opts.min_tissue) continue;

        Patch p;
        p.image = std::move(window);
        p.mask = Mask({ps, ps});
        p.label = LesionClass::non_malignant;
        for (std::size_t i = 0; i < annotations.size(); ++i) {
            const auto& a = annotations[i];
            if (a.label != LesionClass::malignant || annotation_area[i] == 0) continue;
            std::size_t inside = 0;
            for (int r = 0; r < ps; ++r)
                for (int c = 0; c < ps; ++c)
                    if (a.mask.at(r0 + r, c0 + c)) ++inside;
            const double frac = static_cast<double>(inside) /
                                static_cast<double>(annotation_area[i]);
            if (inside > 0 && frac >= opts.min_overlap_fraction) {
                p.label = LesionClass::malignant;
                for (int r = 0; r < ps; ++r)
                    for (int c = 0; c < ps; ++c)
                        if (a.mask.at(r0 + r, c0 + c)) p.mask.at(r, c) = 1;
            }
        }
        p.source_id = image_id;
        out.push_back(std::move(p));
    }
    if (attempts_out) *attempts_out = attempts;
    if (out.empty())
        throw DataError("patch sampling starved on " + image_id + ": no window passed the " +
                        "tissue rule within the attempt cap");
    return out;
}

} // namespace cigan
