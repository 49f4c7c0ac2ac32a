#pragma once

#include <cstdint>
#include <string>

#include "cigan/core/errors.hpp"
#include "cigan/core/image.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/core/tensor.hpp"

namespace cigan {

enum class LesionClass : int { non_malignant = 0, malignant = 1 };

inline const char* to_string(LesionClass c) {
    return c == LesionClass::malignant ? "malignant" : "non-malignant";
}

inline LesionClass lesion_class_from_string(const std::string& s) {
    if (s == "malignant") return LesionClass::malignant;
    if (s == "non-malignant") return LesionClass::non_malignant;
    throw DataError("unknown class label: " + s);
}

// A fixed-size grayscale crop with its lesion mask. `mask` is all-zero for
// patches without a lesion. `synthetic` marks generator output.
struct Patch {
    Tensor<float> image;
    Mask mask;
    LesionClass label = LesionClass::non_malignant;
    std::string source_id;
    bool synthetic = false;
};

inline void validate_patch(const Patch& p, int expect_size = 0) {
    require_image2d(p.image, "patch image");
    require_binary_mask(p.mask, "patch mask");
    if (p.mask.dim(0) != p.image.dim(0) || p.mask.dim(1) != p.image.dim(1))
        throw InvalidInputError("patch mask dims do not match image");
    if (expect_size > 0 && (p.image.dim(0) != expect_size || p.image.dim(1) != expect_size))
        throw InvalidInputError("patch must be " + std::to_string(expect_size) + "x" +
                                std::to_string(expect_size));
    if (!all_finite(p.image) || !all_in_unit_range(p.image))
        throw InvalidInputError("patch intensities must be finite and in [0,1]");
}

// Replaces masked pixels with independent uniform [0,1) draws; everything
// else is copied bit-for-bit.
inline Tensor<float> make_corrupted(const Tensor<float>& image, const Mask& mask,
                                    std::uint64_t rng_seed) {
    require_image2d(image, "make_corrupted");
    require_binary_mask(mask, "make_corrupted");
    if (mask.dim(0) != image.dim(0) || mask.dim(1) != image.dim(1))
        throw InvalidInputError("make_corrupted: mask dims do not match image");
    Tensor<float> out = image;
    Rng rng(derive_seed(rng_seed, "corrupt"));
    for (std::size_t i = 0; i < out.size(); ++i)
        if (mask[i]) out[i] = static_cast<float>(rng.uniform());
    return out;
}

// The 4-channel generator input: corrupted image, mask, and the one-hot
// pair of constant class planes ([1,0] non-malignant, [0,1] malignant).
struct ConditionedInput {
    Tensor<float> channels; // {4, S, S}
    LesionClass target_class = LesionClass::non_malignant;

    int resolution() const { return channels.dim(1); }
};

inline ConditionedInput build_conditioned_input(const Patch& patch, const Mask& mask,
                                                LesionClass target_class,
                                                std::uint64_t rng_seed) {
    require_binary_mask(mask, "build_conditioned_input");
    if (mask.dim(0) != patch.image.dim(0) || mask.dim(1) != patch.image.dim(1))
        throw InvalidInputError("build_conditioned_input: mask dims do not match patch");
    const int h = patch.image.dim(0), w = patch.image.dim(1);
    if (h != w) throw InvalidInputError("build_conditioned_input: patch must be square");

    const Tensor<float> corrupted = make_corrupted(patch.image, mask, rng_seed);
    ConditionedInput input;
    input.target_class = target_class;
    input.channels = Tensor<float>({4, h, w});
    const float non_mal = target_class == LesionClass::non_malignant ? 1.0f : 0.0f;
    const float mal = 1.0f - non_mal;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            input.channels.at(0, r, c) = corrupted.at(r, c);
            input.channels.at(1, r, c) = static_cast<float>(mask.at(r, c));
            input.channels.at(2, r, c) = non_mal;
            input.channels.at(3, r, c) = mal;
        }
    }
    return input;
}

// Constant class planes only, for the discriminator input stack.
inline Tensor<float> class_planes(LesionClass c, int h, int w) {
    Tensor<float> planes({2, h, w});
    const float non_mal = c == LesionClass::non_malignant ? 1.0f : 0.0f;
    for (int r = 0; r < h; ++r) {
        for (int q = 0; q < w; ++q) {
            planes.at(0, r, q) = non_mal;
            planes.at(1, r, q) = 1.0f - non_mal;
        }
    }
    return planes;
}

} // namespace cigan
