#pragma once

#include <cstdint>

#include "cigan/core/image.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/data/patch.hpp"

namespace cigan {

// Traditional augmentation: rotation up to +-30 degrees, horizontal flip
// with probability 0.5, rescale by a factor in [0.75, 1.25] with crop/pad
// back to the source frame. Applied in that order, zero fill outside.
struct AugmentationPolicy {
    double max_rotation_deg = 30.0;
    double flip_prob = 0.5;
    double rescale_min = 0.75;
    double rescale_max = 1.25;

    void validate() const {
        if (max_rotation_deg < 0.0) throw ConfigError("augmentation: rotation must be >= 0");
        if (flip_prob < 0.0 || flip_prob > 1.0)
            throw ConfigError("augmentation: flip_prob must be in [0,1]");
        if (rescale_min <= 0.0 || rescale_max < rescale_min)
            throw ConfigError("augmentation: invalid rescale range");
    }
};

struct AugmentationDraw {
    double rotation_deg = 0.0;
    bool flip = false;
    double rescale = 1.0;
};

inline AugmentationDraw draw_augmentation(const AugmentationPolicy& policy, Rng& rng) {
    AugmentationDraw d;
    d.rotation_deg = rng.uniform(-policy.max_rotation_deg, policy.max_rotation_deg);
    d.flip = rng.bernoulli(policy.flip_prob);
    d.rescale = rng.uniform(policy.rescale_min, policy.rescale_max);
    return d;
}

template <typename T>
Tensor<T> apply_augmentation_draw(const Tensor<T>& image, const AugmentationDraw& draw) {
    Tensor<T> out = image;
    if (draw.rotation_deg != 0.0) out = rotate_about_center(out, draw.rotation_deg);
    if (draw.flip) out = hflip(out);
    if (draw.rescale != 1.0) out = rescale_about_center(out, draw.rescale);
    return out;
}

inline Mask apply_augmentation_draw_mask(const Mask& mask, const AugmentationDraw& draw) {
    Tensor<float> f({mask.dim(0), mask.dim(1)});
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(mask[i]);
    f = apply_augmentation_draw(f, draw);
    Mask out({mask.dim(0), mask.dim(1)});
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] > 0.5f ? 1 : 0;
    return out;
}

inline Patch apply_traditional_augmentation(const Patch& patch, const AugmentationPolicy& policy,
                                            std::uint64_t rng_seed) {
    Rng rng(derive_seed(rng_seed, "augment"));
    const AugmentationDraw draw = draw_augmentation(policy, rng);
    Patch out = patch;
    out.image = apply_augmentation_draw(patch.image, draw);
    out.mask = apply_augmentation_draw_mask(patch.mask, draw);
    return out;
}

} // namespace cigan
