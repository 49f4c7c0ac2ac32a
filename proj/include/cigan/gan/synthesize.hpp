#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/data/patch.hpp"
#include "cigan/gan/generator.hpp"

namespace cigan {

// Picks a donor lesion mask uniformly and places it in the target frame.
// Donor masks keep their original coordinates by default (they come from
// same-size patches); with `reposition` the mask's bounding box is shifted
// to a random in-frame position.
inline Mask transplant_mask(const Patch& target, const std::vector<Mask>& donor_masks,
                            std::uint64_t rng_seed, bool reposition = false) {
    if (donor_masks.empty())
        throw InvalidInputError("transplant_mask: donor mask list is empty");
    const int h = target.image.dim(0), w = target.image.dim(1);
    Rng rng(derive_seed(rng_seed, "transplant"));
    const Mask& donor = donor_masks[rng.uniform_int(donor_masks.size())];
    require_binary_mask(donor, "transplant_mask donor");
    if (mask_popcount(donor) == 0)
        throw InvalidInputError("transplant_mask: donor mask is empty");
    if (donor.dim(0) != h || donor.dim(1) != w)
        throw InvalidInputError("transplant_mask: donor frame differs from target");
    if (!reposition) return donor;

    // Bounding box of the donor lesion.
    int r_min = h, r_max = -1, c_min = w, c_max = -1;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!donor.at(r, c)) continue;
            r_min = std::min(r_min, r);
            r_max = std::max(r_max, r);
            c_min = std::min(c_min, c);
            c_max = std::max(c_max, c);
        }
    }
    const int bh = r_max - r_min + 1, bw = c_max - c_min + 1;
    const int new_r = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(h - bh + 1)));
    const int new_c = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(w - bw + 1)));
    Mask out({h, w});
    for (int r = 0; r < bh; ++r)
        for (int c = 0; c < bw; ++c)
            if (donor.at(r_min + r, c_min + c)) out.at(new_r + r, new_c + c) = 1;
    return out;
}

struct SynthesizeOptions {
    bool reposition_donor_masks = false;
};

// Bidirectional synthesis: each non-malignant patch gets a malignant lesion
// generated under a transplanted mask; each malignant patch has its lesion
// replaced with non-malignant infill under its own mask. Output order
// matches input order; outside-mask pixels are bit-identical to the source.
inline std::vector<Patch> synthesize_dataset(const std::vector<Patch>& patches,
                                             Generator<float>& generator, std::uint64_t seed,
                                             const SynthesizeOptions& opts = {}) {
    std::vector<Mask> donor_masks;
    for (const auto& p : patches)
        if (p.label == LesionClass::malignant && mask_popcount(p.mask) > 0)
            donor_masks.push_back(p.mask);

    std::vector<Patch> out;
    out.reserve(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const Patch& src = patches[i];
        Mask mask;
        LesionClass target;
        if (src.label == LesionClass::non_malignant) {
            mask = transplant_mask(src, donor_masks, derive_seed(seed, "donor-pick", i),
                                   opts.reposition_donor_masks);
            target = LesionClass::malignant;
        } else {
            if (mask_popcount(src.mask) == 0)
                throw DataError("synthesize: malignant patch " + src.source_id +
                                " has no lesion mask");
            mask = src.mask;
            target = LesionClass::non_malignant;
        }
        const ConditionedInput input =
            build_conditioned_input(src, mask, target, derive_seed(seed, "syn-noise", i));
        const Tensor<float> raw = generator.forward(input.channels);
        Patch syn = composite(raw, src, mask, target);
        syn.source_id = src.source_id;
        out.push_back(std::move(syn));
    }
    return out;
}

} // namespace cigan
