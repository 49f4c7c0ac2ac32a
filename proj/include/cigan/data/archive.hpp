#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/png_io.hpp"
#include "cigan/data/manifest.hpp"
#include "cigan/data/patch.hpp"

namespace cigan {

// A patch archive is a directory of PNG pairs named
// <source_id>_<index>_{img,mask}.png plus a manifest.jsonl. Patch images are
// 16-bit PNGs so the [0,1] quantization error stays at 1/65535.

struct ArchivePatch {
    Patch patch;
    Split split = Split::train;
    std::string checkpoint; // generator fingerprint, synthetic records only
};

inline void write_patch_archive(const std::string& dir, const std::vector<ArchivePatch>& patches,
                                std::uint64_t seed,
                                std::array<double, 3> fractions = {0.8, 0.1, 0.1}) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.split_fractions = fractions;
    std::map<std::string, int> per_source_index;
    for (const auto& ap : patches) {
        const int idx = per_source_index[ap.patch.source_id]++;
        const std::string stem = ap.patch.source_id + "_" + std::to_string(idx);
        const std::string img_name = stem + "_img.png";
        const std::string mask_name = stem + "_mask.png";
        write_png_gray16((fs::path(dir) / img_name).string(), ap.patch.image);
        write_png_mask((fs::path(dir) / mask_name).string(), ap.patch.mask);
        ManifestRecord rec;
        rec.id = stem;
        rec.path = img_name;
        rec.mask_path = mask_name;
        rec.label = ap.patch.label;
        rec.split = ap.split;
        rec.synthetic = ap.patch.synthetic;
        rec.source_id = ap.patch.source_id;
        rec.checkpoint = ap.checkpoint;
        manifest.records.push_back(std::move(rec));
    }
    write_manifest((fs::path(dir) / "manifest.jsonl").string(), manifest);
}

inline std::vector<ArchivePatch> read_patch_archive(const std::string& dir) {
    namespace fs = std::filesystem;
    const DatasetManifest manifest = read_manifest((fs::path(dir) / "manifest.jsonl").string());
    std::vector<ArchivePatch> out;
    out.reserve(manifest.records.size());
    for (const auto& rec : manifest.records) {
        ArchivePatch ap;
        ap.patch.image = read_png_gray((fs::path(dir) / rec.path).string());
        if (rec.mask_path) {
            ap.patch.mask = read_png_mask((fs::path(dir) / *rec.mask_path).string());
        } else {
            ap.patch.mask = Mask({ap.patch.image.dim(0), ap.patch.image.dim(1)});
        }
        ap.patch.label = rec.label;
        // The record id is the unique per-patch handle; provenance to the
        // originating patch/image stays in the manifest's source_id field.
        ap.patch.source_id = rec.id;
        ap.patch.synthetic = rec.synthetic;
        ap.split = rec.split;
        ap.checkpoint = rec.checkpoint;
        out.push_back(std::move(ap));
    }
    return out;
}

} // namespace cigan
