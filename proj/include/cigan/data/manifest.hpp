#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cigan/core/errors.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/data/patch.hpp"

namespace cigan {

enum class Split : int { train = 0, val = 1, test = 2 };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw DataError("unknown split: " + s);
}

struct ManifestRecord {
    std::string id;
    std::string path;
    std::optional<std::string> mask_path;
    LesionClass label = LesionClass::non_malignant;
    Split split = Split::train;
    bool synthetic = false;
    std::string source_id;   // provenance for synthetic records
    std::string checkpoint;  // generator fingerprint for synthetic records
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
    std::uint64_t seed = 0;
    std::array<double, 3> split_fractions{0.8, 0.1, 0.1};

    std::vector<const ManifestRecord*> in_split(Split s) const {
        std::vector<const ManifestRecord*> out;
        for (const auto& r : records)
            if (r.split == s) out.push_back(&r);
        return out;
    }

    std::size_t count(Split s) const { return in_split(s).size(); }
};

// Stratified 80/10/10 assignment (largest remainder per class). When two
// splits tie on remainder the winner alternates across ties so small
// datasets still land on the aggregate fractions.
inline DatasetManifest build_manifest(std::vector<ManifestRecord> records, std::uint64_t seed,
                                      std::array<double, 3> fractions = {0.8, 0.1, 0.1}) {
    if (records.empty()) throw InvalidInputError("build_manifest: empty record list");
    const double fsum = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(fsum - 1.0) > 1e-9)
        throw InvalidInputError("build_manifest: split fractions must sum to 1");

    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.split_fractions = fractions;

    // Group record indices per class, keeping input order.
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < records.size(); ++i)
        by_class[static_cast<std::size_t>(records[i].label)].push_back(i);

    int tie_cursor = 1; // next split to win a remainder tie (1 = val, 2 = test)
    for (auto& idxs : by_class) {
        if (idxs.empty()) continue;
        const auto n = static_cast<double>(idxs.size());
        std::array<std::size_t, 3> take{};
        std::array<double, 3> remainder{};
        std::size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double want = fractions[static_cast<std::size_t>(s)] * n;
            take[static_cast<std::size_t>(s)] = static_cast<std::size_t>(want);
            remainder[static_cast<std::size_t>(s)] = want - static_cast<double>(take[static_cast<std::size_t>(s)]);
            assigned += take[static_cast<std::size_t>(s)];
        }
        std::size_t leftover = idxs.size() - assigned;
        while (leftover > 0) {
            int best = 0;
            bool tie = false;
            for (int s = 1; s < 3; ++s) {
                if (remainder[static_cast<std::size_t>(s)] > remainder[static_cast<std::size_t>(best)] + 1e-12) {
                    best = s;
                    tie = false;
                } else if (std::abs(remainder[static_cast<std::size_t>(s)] -
                                    remainder[static_cast<std::size_t>(best)]) <= 1e-12) {
                    tie = true;
                }
            }
            if (tie) {
                // Find the tied set containing `best` and pick by cursor.
                for (int s = 0; s < 3; ++s) {
                    if (std::abs(remainder[static_cast<std::size_t>(s)] -
                                 remainder[static_cast<std::size_t>(best)]) <= 1e-12 &&
                        s == tie_cursor) {
                        best = s;
                        break;
                    }
                }
                tie_cursor = tie_cursor == 1 ? 2 : 1;
            }
            take[static_cast<std::size_t>(best)] += 1;
            remainder[static_cast<std::size_t>(best)] = -1.0;
            --leftover;
        }

        // Shuffle the class's records, then fill train, val, test in order.
        Rng rng(derive_seed(seed, "split", static_cast<std::uint64_t>(records[idxs.front()].label ==
                                                                      LesionClass::malignant)));
        for (std::size_t i = idxs.size(); i > 1; --i) {
            const std::size_t j = rng.uniform_int(i);
            std::swap(idxs[i - 1], idxs[j]);
        }
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s) {
            for (std::size_t k = 0; k < take[static_cast<std::size_t>(s)]; ++k)
                records[idxs[pos++]].split = static_cast<Split>(s);
        }
    }

    manifest.records = std::move(records);
    return manifest;
}

// Line-delimited JSON: a header record carrying seed and split fractions,
// then one record per line.
inline void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write manifest: " + path);
    nlohmann::ordered_json header;
    header["seed"] = manifest.seed;
    header["split_fractions"] = manifest.split_fractions;
    out << header.dump() << "\n";
    for (const auto& r : manifest.records) {
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["path"] = r.path;
        j["mask_path"] = r.mask_path ? nlohmann::ordered_json(*r.mask_path)
                                     : nlohmann::ordered_json(nullptr);
        j["label"] = to_string(r.label);
        j["split"] = to_string(r.split);
        if (r.synthetic) {
            j["synthetic"] = true;
            j["source_id"] = r.source_id;
            j["checkpoint"] = r.checkpoint;
        }
        out << j.dump() << "\n";
    }
    if (!out) throw DataError("manifest write failed: " + path);
}

inline DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest: " + path);
    DatasetManifest manifest;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("manifest parse error in " + path + ": " + e.what());
        }
        if (!have_header) {
            if (!j.contains("seed") || !j.contains("split_fractions"))
                throw DataError("manifest missing header line: " + path);
            manifest.seed = j.at("seed").get<std::uint64_t>();
            const auto f = j.at("split_fractions").get<std::vector<double>>();
            if (f.size() != 3) throw DataError("manifest header: expected 3 split fractions");
            manifest.split_fractions = {f[0], f[1], f[2]};
            have_header = true;
            continue;
        }
        ManifestRecord r;
        try {
            r.id = j.at("id").get<std::string>();
            r.path = j.at("path").get<std::string>();
            if (j.contains("mask_path") && !j.at("mask_path").is_null())
                r.mask_path = j.at("mask_path").get<std::string>();
            r.label = lesion_class_from_string(j.at("label").get<std::string>());
            r.split = split_from_string(j.at("split").get<std::string>());
            r.synthetic = j.value("synthetic", false);
            r.source_id = j.value("source_id", std::string());
            r.checkpoint = j.value("checkpoint", std::string());
        } catch (const nlohmann::json::exception& e) {
            throw DataError("manifest record error in " + path + ": " + e.what());
        }
        manifest.records.push_back(std::move(r));
    }
    if (!have_header) throw DataError("manifest is empty: " + path);
    return manifest;
}

} // namespace cigan
