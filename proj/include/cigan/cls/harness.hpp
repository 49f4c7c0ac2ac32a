#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cigan/cls/augment.hpp"
#include "cigan/cls/classifier.hpp"
#include "cigan/cls/curriculum.hpp"
#include "cigan/core/errors.hpp"
#include "cigan/core/io.hpp"
#include "cigan/data/patch.hpp"
#include "cigan/eval/auc.hpp"
#include "cigan/nn/checkpoint.hpp"

namespace cigan {

enum class AugmentationScheme : int { none = 0, traditional = 1, cigan_traditional = 2 };

inline const char* to_string(AugmentationScheme s) {
    switch (s) {
        case AugmentationScheme::none: return "none";
        case AugmentationScheme::traditional: return "traditional";
        default: return "cigan+traditional";
    }
}

inline AugmentationScheme scheme_from_string(const std::string& s) {
    if (s == "none") return AugmentationScheme::none;
    if (s == "traditional") return AugmentationScheme::traditional;
    if (s == "cigan+traditional" || s == "cigan") return AugmentationScheme::cigan_traditional;
    throw ConfigError("unknown augmentation scheme: " + s +
                      " (expected none | traditional | cigan+traditional)");
}

struct ClassifierDatasets {
    std::vector<Patch> train;
    std::vector<Patch> val;  // may be empty; best checkpoint then falls back to final
    std::vector<Patch> test;
    std::vector<Patch> synthetic; // required for the cigan scheme only
};

struct ClassifierMetricsRow {
    std::int64_t iteration = 0; // 1-based
    double lr = 0.0;
    double loss = 0.0;
    std::optional<double> val_auc;

    static const char* csv_header() { return "iteration,lr,loss,val_auc"; }

    std::vector<std::string> csv_cells() const {
        return {std::to_string(iteration), format_number(lr), format_number(loss),
                val_auc ? format_number(*val_auc) : std::string()};
    }
};

struct ScoreRecord {
    std::string id;
    int label = 0;
    double score = 0.0;
};

struct ClassifierRunResult {
    NetworkParams best_params;
    std::int64_t best_iteration = 0;
    std::optional<double> best_val_auc;
    std::vector<ScoreRecord> test_scores; // scored with best_params
};

namespace detail {

inline double score_pool(SmallCnn<float>& net, const std::vector<Patch>& pool,
                         std::vector<double>* scores = nullptr,
                         std::vector<int>* labels = nullptr) {
    std::vector<double> s;
    std::vector<int> l;
    for (const auto& p : pool) {
        s.push_back(static_cast<double>(net.forward(p.image)));
        l.push_back(p.label == LesionClass::malignant ? 1 : 0);
    }
    const double auc = roc_auc(s, l);
    if (scores) *scores = std::move(s);
    if (labels) *labels = std::move(l);
    return auc;
}

} // namespace detail

// Trains the patch classifier under one augmentation scheme. The cigan
// scheme mixes curriculum batches of real and synthetic patches and then
// applies traditional augmentation to every example; `traditional` augments
// all-real batches; `none` feeds raw batches. Validation AUC is logged every
// `val_every` iterations and picks the checkpoint used for test scoring.
inline ClassifierRunResult train_classifier(
    AugmentationScheme scheme, const ClassifierDatasets& data, const ClassifierConfig& cfg,
    const CurriculumSchedule& schedule, const AugmentationPolicy& policy, std::uint64_t seed,
    const std::function<void(const ClassifierMetricsRow&)>& on_row = nullptr,
    std::int64_t val_every = 500) {
    cfg.validate();
    schedule.validate();
    policy.validate();
    if (data.train.empty()) throw ConfigError("train_classifier: empty train pool");
    if (data.test.empty()) throw ConfigError("train_classifier: empty test pool");
    if (scheme == AugmentationScheme::cigan_traditional && data.synthetic.empty())
        throw ConfigError("train_classifier: cigan scheme requires a synthetic pool");

    SmallCnn<float> net(cfg);
    net.init(derive_seed(seed, "cls"));
    if (cfg.init == "pretrained-backbone")
        net.load(load_checkpoint(cfg.weights_file, cfg.fingerprint()));
    auto params = net.params();
    nn::Adam<float> adam(cfg.adam, params);

    // All-real schemes reuse the curriculum sampler pinned at fraction 1 so
    // the batch index stream matches across schemes for a given seed.
    CurriculumSchedule all_real;
    all_real.base_real_fraction = 1.0;
    all_real.cap = 1.0;
    all_real.growth = 1.0;

    ClassifierRunResult result;
    const std::vector<Patch> no_synth;
    const double batch_inv = 1.0 / cfg.batch_size;
    bool have_best = false;

    // Validation AUC needs both classes in the val pool; tiny stratified
    // splits can end up single-class, in which case selection falls back to
    // the final checkpoint.
    bool val_usable = false;
    {
        bool pos = false, neg = false;
        for (const auto& p : data.val)
            (p.label == LesionClass::malignant ? pos : neg) = true;
        val_usable = pos && neg;
    }

    for (std::int64_t it = 0; it < cfg.iterations; ++it) {
        const double lr = cfg.lr_at(it);
        adam.set_lr(lr);

        const bool use_curriculum = scheme == AugmentationScheme::cigan_traditional;
        const std::vector<CurriculumExample> batch =
            use_curriculum
                ? curriculum_batch(data.train, data.synthetic, it, cfg.batch_size, schedule, seed)
                : curriculum_batch(data.train, no_synth, it, cfg.batch_size, all_real, seed);

        net.zero_grads();
        double loss_sum = 0.0;
        for (int slot = 0; slot < cfg.batch_size; ++slot) {
            const Patch* patch = batch[static_cast<std::size_t>(slot)].patch;
            Tensor<float> image = patch->image;
            if (scheme != AugmentationScheme::none) {
                Rng rng(derive_seed(seed, "aug", static_cast<std::uint64_t>(it),
                                    static_cast<std::uint64_t>(slot)));
                image = apply_augmentation_draw(image, draw_augmentation(policy, rng));
            }
            typename SmallCnn<float>::Trace trace;
            const double p = net.forward(image, &trace);
            const double y = patch->label == LesionClass::malignant ? 1.0 : 0.0;
            const double pc = std::min(std::max(p, 1e-7), 1.0 - 1e-7);
            loss_sum += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
            net.backward_logit(trace, static_cast<float>((p - y) * batch_inv));
        }
        adam.step(params);

        ClassifierMetricsRow row;
        row.iteration = it + 1;
        row.lr = lr;
        row.loss = loss_sum * batch_inv;
        if (!std::isfinite(row.loss))
            throw NumericError("classifier diverged at iteration " + std::to_string(row.iteration));

        const bool val_point = val_usable &&
                               (row.iteration % val_every == 0 || row.iteration == cfg.iterations);
        if (val_point) {
            const double val_auc = detail::score_pool(net, data.val);
            row.val_auc = val_auc;
            if (!have_best || val_auc > *result.best_val_auc) {
                result.best_params = net.to_params(static_cast<std::uint64_t>(row.iteration));
                result.best_iteration = row.iteration;
                result.best_val_auc = val_auc;
                have_best = true;
            }
        }
        if (on_row) on_row(row);
    }

    if (!have_best) {
        result.best_params = net.to_params(static_cast<std::uint64_t>(cfg.iterations));
        result.best_iteration = cfg.iterations;
    }

    // Test scores from the selected checkpoint.
    SmallCnn<float> best(cfg);
    best.load(result.best_params);
    for (const auto& p : data.test) {
        ScoreRecord rec;
        rec.id = p.source_id;
        rec.label = p.label == LesionClass::malignant ? 1 : 0;
        rec.score = static_cast<double>(best.forward(p.image));
        result.test_scores.push_back(std::move(rec));
    }
    return result;
}

} // namespace cigan
