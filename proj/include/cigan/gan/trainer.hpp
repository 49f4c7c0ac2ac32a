#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/io.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/data/patch.hpp"
#include "cigan/gan/discriminator.hpp"
#include "cigan/gan/extractor.hpp"
#include "cigan/gan/generator.hpp"
#include "cigan/gan/losses.hpp"
#include "cigan/nn/adam.hpp"
#include "cigan/nn/checkpoint.hpp"

namespace cigan {

struct GanTrainConfig {
    nn::AdamConfig adam{1e-4, 0.9, 0.999, 1e-8};
    int batch_size = 8;
    std::int64_t pretrain_iters = 10000;
    std::int64_t joint_iters = 100000;
    double switch_threshold = 0.3;
    std::int64_t checkpoint_every = 0; // 0 -> checkpoints only at phase ends
    int livelock_cap = 500;
    double boundary_sigma = 10.0;
    LossWeights weights;
    std::uint64_t seed = 0;

    void validate() const {
        if (adam.lr <= 0.0) throw ConfigError("gan_train: lr must be > 0");
        if (batch_size < 1) throw ConfigError("gan_train: batch_size must be >= 1");
        if (switch_threshold <= 0.0) throw ConfigError("gan_train: switch_threshold must be > 0");
        if (pretrain_iters < 0 || joint_iters < 0)
            throw ConfigError("gan_train: iteration counts must be >= 0");
        if (livelock_cap < 1) throw ConfigError("gan_train: livelock_cap must be >= 1");
        weights.validate();
    }
};

enum class TrainPhase : int { pretrain = 0, joint = 1 };
enum class ActiveNetwork : int { generator = 0, discriminator = 1 };

inline const char* to_string(TrainPhase p) { return p == TrainPhase::pretrain ? "pretrain" : "joint"; }
inline const char* to_string(ActiveNetwork a) {
    return a == ActiveNetwork::generator ? "generator" : "discriminator";
}

struct TrainState {
    TrainPhase phase = TrainPhase::pretrain;
    std::int64_t iteration = 0; // completed optimizer steps (pretrain + joint)
    ActiveNetwork active = ActiveNetwork::discriminator;
    double last_g_loss = 0.0;
    double last_d_loss = 0.0;
    int consecutive_steps = 0; // steps taken on `active` since the last switch
};

// Post-step alternation rule: switch when the just-trained network's loss
// drops below the threshold; force a switch after livelock_cap consecutive
// steps on the same network. Returns true when the forced path fired.
inline bool update_alternation(TrainState& state, double active_loss, double threshold,
                               int livelock_cap) {
    state.consecutive_steps += 1;
    bool forced = false;
    bool switch_now = active_loss < threshold;
    if (!switch_now && state.consecutive_steps >= livelock_cap) {
        switch_now = true;
        forced = true;
    }
    if (switch_now) {
        state.active = state.active == ActiveNetwork::generator ? ActiveNetwork::discriminator
                                                                : ActiveNetwork::generator;
        state.consecutive_steps = 0;
    }
    return forced;
}

// Deterministic sampling-with-replacement stream over the train split.
// Patches without a lesion mask borrow a donor mask so every training pair
// has an infill region; the conditioning class is always the patch's own
// label, so the generator learns both directions of the class conditioning.
class TrainingStream {
public:
    TrainingStream(std::vector<Patch> patches, std::uint64_t seed)
        : patches_(std::move(patches)), seed_(seed) {
        if (patches_.empty()) throw ConfigError("training stream: no patches");
        bool has_mal = false, has_non = false;
        for (std::size_t i = 0; i < patches_.size(); ++i) {
            if (patches_[i].label == LesionClass::malignant) has_mal = true;
            else has_non = true;
            if (mask_popcount(patches_[i].mask) > 0) donor_indices_.push_back(i);
        }
        if (!has_mal || !has_non)
            throw ConfigError("training stream: train split must contain both classes "
                              "(class conditioning is degenerate otherwise)");
        if (donor_indices_.empty())
            throw ConfigError("training stream: no lesion masks available for infill training");
    }

    struct Sample {
        const Patch* real;
        const Mask* mask; // own mask, or donor for maskless patches
        ConditionedInput input;
    };

    Sample draw(std::int64_t iteration, int slot) const {
        const auto it = static_cast<std::uint64_t>(iteration);
        const auto sl = static_cast<std::uint64_t>(slot);
        Rng pick(derive_seed(seed_, "batch", it, sl));
        const std::size_t idx = pick.uniform_int(patches_.size());
        const Patch& patch = patches_[idx];
        const Mask* mask = &patch.mask;
        if (mask_popcount(patch.mask) == 0) {
            Rng donor(derive_seed(seed_, "donor", it, sl));
            mask = &patches_[donor_indices_[donor.uniform_int(donor_indices_.size())]].mask;
        }
        Sample s{&patch, mask, {}};
        s.input = build_conditioned_input(patch, *mask, patch.label,
                                          derive_seed(seed_, "noise", it, sl));
        return s;
    }

    const std::vector<Patch>& patches() const { return patches_; }

private:
    std::vector<Patch> patches_;
    std::vector<std::size_t> donor_indices_;
    std::uint64_t seed_ = 0;
};

struct GanMetricsRow {
    std::int64_t iteration = 0; // 1-based
    TrainPhase phase = TrainPhase::pretrain;
    ActiveNetwork active = ActiveNetwork::generator;
    double g_loss = 0.0;
    double d_loss = 0.0;
    double feat = 0.0;
    double bound = 0.0;
    double adv = 0.0;

    static const char* csv_header() { return "iteration,phase,active,g_loss,d_loss,feat,bound,adv"; }

    std::vector<std::string> csv_cells() const {
        return {std::to_string(iteration), to_string(phase), to_string(active),
                format_number(g_loss), format_number(d_loss), format_number(feat),
                format_number(bound), format_number(adv)};
    }
};

class GanTrainer {
public:
    GanTrainer(GeneratorConfig gen_cfg, DiscriminatorConfig disc_cfg, ExtractorConfig ext_cfg,
               GanTrainConfig train_cfg)
        : generator_(std::move(gen_cfg)), discriminator_(std::move(disc_cfg)),
          extractor_(std::move(ext_cfg)), cfg_(train_cfg) {
        cfg_.validate();
        if (generator_.config().final_resolution != discriminator_.config().input_resolution)
            throw ConfigError("gan_train: generator and discriminator resolutions differ");
        if (!extractor_.config().weights_file.empty())
            extractor_.load(load_checkpoint(extractor_.config().weights_file,
                                            extractor_.config().fingerprint()));
        g_params_ = generator_.params();
        d_params_ = discriminator_.params();
        adam_g_ = nn::Adam<float>(cfg_.adam, g_params_);
        adam_d_ = nn::Adam<float>(cfg_.adam, d_params_);
    }

    void init_networks() {
        generator_.init(derive_seed(cfg_.seed, "gen"));
        discriminator_.init(derive_seed(cfg_.seed, "disc"));
        state_ = TrainState{};
    }

    Generator<float>& generator() { return generator_; }
    Discriminator<float>& discriminator() { return discriminator_; }
    const PerceptualExtractor<float>& extractor() const { return extractor_; }
    const TrainState& state() const { return state_; }
    const GanTrainConfig& config() const { return cfg_; }

    std::string trainer_canonical() const {
        return "trainer;" + generator_.config().canonical() + ";" +
               discriminator_.config().canonical() + ";" + extractor_.config().canonical() +
               ";lr=" + format_number(cfg_.adam.lr) + ";b1=" + format_number(cfg_.adam.beta1) +
               ";b2=" + format_number(cfg_.adam.beta2) + ";eps=" + format_number(cfg_.adam.eps) +
               ";batch=" + std::to_string(cfg_.batch_size) +
               ";pretrain=" + std::to_string(cfg_.pretrain_iters) +
               ";joint=" + std::to_string(cfg_.joint_iters) +
               ";thresh=" + format_number(cfg_.switch_threshold) +
               ";cap=" + std::to_string(cfg_.livelock_cap) +
               ";sigma=" + format_number(cfg_.boundary_sigma) +
               ";wadv=" + format_number(cfg_.weights.adversarial) +
               ";wfeat=" + format_number(cfg_.weights.feature) +
               ";wbound=" + format_number(cfg_.weights.boundary);
    }

    Fingerprint trainer_fingerprint() const { return sha256_bytes(trainer_canonical()); }

    // One feature-loss pretraining step on the generator.
    GanMetricsRow pretrain_step(const TrainingStream& stream) {
        const std::int64_t it = state_.iteration;
        generator_.zero_grads();
        double feat_sum = 0.0;
        const double batch_inv = 1.0 / cfg_.batch_size;
        for (int slot = 0; slot < cfg_.batch_size; ++slot) {
            const TrainingStream::Sample sample = stream.draw(it, slot);
            typename Generator<float>::Trace trace;
            const Tensor<float> raw = generator_.forward(sample.input.channels, &trace);
            Tensor<float> comp = composite_image(raw, sample.real->image, *sample.mask);
            Tensor<float> dcomp;
            const float feat = run_feature_loss(sample.real->image, comp, &dcomp, it);
            feat_sum += feat;
            Tensor<float> draw_grad({raw.dim(0), raw.dim(1)});
            const float scale = static_cast<float>(cfg_.weights.feature * batch_inv);
            for (std::size_t i = 0; i < draw_grad.size(); ++i)
                draw_grad[i] = (*sample.mask)[i] ? dcomp[i] * scale : 0.0f;
            generator_.backward(trace, draw_grad);
        }
        adam_g_.step(g_params_);
        state_.iteration += 1;

        GanMetricsRow row;
        row.iteration = state_.iteration;
        row.phase = TrainPhase::pretrain;
        row.active = ActiveNetwork::generator;
        row.feat = feat_sum * batch_inv;
        row.g_loss = cfg_.weights.feature * row.feat;
        state_.last_g_loss = row.g_loss;
        return row;
    }

    // One alternating joint step; only the active network's parameters move.
    GanMetricsRow joint_step(const TrainingStream& stream, bool* forced_switch = nullptr) {
        const std::int64_t it = state_.iteration;
        state_.phase = TrainPhase::joint;
        const int batch = cfg_.batch_size;
        const double batch_inv = 1.0 / batch;

        std::vector<double> d_real_probs, d_fake_probs;
        d_real_probs.reserve(static_cast<std::size_t>(batch));
        d_fake_probs.reserve(static_cast<std::size_t>(batch));
        double feat_sum = 0.0, bound_sum = 0.0;

        GanMetricsRow row;
        row.iteration = it + 1;
        row.phase = TrainPhase::joint;
        row.active = state_.active;

        if (state_.active == ActiveNetwork::discriminator) {
            discriminator_.zero_grads();
            for (int slot = 0; slot < batch; ++slot) {
                const TrainingStream::Sample sample = stream.draw(it, slot);
                const Tensor<float> raw = generator_.forward(sample.input.channels);
                const Tensor<float> comp = composite_image(raw, sample.real->image, *sample.mask);

                typename Discriminator<float>::Trace tr_real, tr_fake;
                const float p_real =
                    discriminator_.forward(sample.real->image, sample.real->label, &tr_real);
                const float p_fake =
                    discriminator_.forward(comp, sample.input.target_class, &tr_fake);
                d_real_probs.push_back(p_real);
                d_fake_probs.push_back(p_fake);
                // d(-log p_real)/dlogit = p_real - 1 ; d(-log(1-p_fake))/dlogit = p_fake
                discriminator_.backward_logit(tr_real, static_cast<float>((p_real - 1.0) * batch_inv),
                                              false, true);
                discriminator_.backward_logit(tr_fake, static_cast<float>(p_fake * batch_inv),
                                              false, true);
            }
            adam_d_.step(d_params_);
        } else {
            generator_.zero_grads();
            const float w_adv = static_cast<float>(cfg_.weights.adversarial * batch_inv);
            const float w_feat = static_cast<float>(cfg_.weights.feature * batch_inv);
            const float w_bound = static_cast<float>(cfg_.weights.boundary * batch_inv);
            for (int slot = 0; slot < batch; ++slot) {
                const TrainingStream::Sample sample = stream.draw(it, slot);
                typename Generator<float>::Trace trace;
                const Tensor<float> raw = generator_.forward(sample.input.channels, &trace);
                const Tensor<float> comp = composite_image(raw, sample.real->image, *sample.mask);

                typename Discriminator<float>::Trace tr_fake;
                const float p_fake =
                    discriminator_.forward(comp, sample.input.target_class, &tr_fake);
                d_fake_probs.push_back(p_fake);
                const float p_real =
                    discriminator_.forward(sample.real->image, sample.real->label);
                d_real_probs.push_back(p_real);

                // Non-saturating generator objective: d(-log p_fake)/dlogit = p_fake - 1.
                Tensor<float> d_image = discriminator_.backward_logit(
                    tr_fake, static_cast<float>((p_fake - 1.0) * w_adv), true, false);

                Tensor<float> dcomp_feat;
                const float feat = run_feature_loss(sample.real->image, comp, &dcomp_feat, it);
                feat_sum += feat;

                const Tensor<float>& w = boundary_weight_cached(sample.mask);
                Tensor<float> dcomp_bound;
                bound_sum += boundary_loss(sample.real->image, comp, w, &dcomp_bound);

                Tensor<float> draw_grad({raw.dim(0), raw.dim(1)});
                for (std::size_t i = 0; i < draw_grad.size(); ++i) {
                    if (!(*sample.mask)[i]) {
                        draw_grad[i] = 0.0f;
                        continue;
                    }
                    draw_grad[i] = d_image[i] + w_feat * dcomp_feat[i] + w_bound * dcomp_bound[i];
                }
                generator_.backward(trace, draw_grad);
            }
            adam_g_.step(g_params_);
        }

        const AdversarialLosses adv = adversarial_losses(d_real_probs, d_fake_probs);
        if (!std::isfinite(adv.d_loss) || !std::isfinite(adv.g_loss))
            throw NumericError("training diverged at iteration " + std::to_string(it + 1));
        row.g_loss = adv.g_loss;
        row.d_loss = adv.d_loss;
        row.adv = adv.g_loss;
        row.feat = feat_sum * batch_inv;
        row.bound = bound_sum * batch_inv;
        state_.last_g_loss = adv.g_loss;
        state_.last_d_loss = adv.d_loss;
        state_.iteration += 1;

        const double gate_loss =
            row.active == ActiveNetwork::generator ? adv.g_loss : adv.d_loss;
        const bool forced =
            update_alternation(state_, gate_loss, cfg_.switch_threshold, cfg_.livelock_cap);
        if (forced_switch) *forced_switch = forced;
        return row;
    }

    // Bundles networks, optimizer moments and alternation state.
    NetworkParams trainer_checkpoint() {
        NetworkParams out = snapshot_params(g_params_, trainer_fingerprint(),
                                            static_cast<std::uint64_t>(state_.iteration));
        for (const auto& p : d_params_) out.add(p.name, p.value->cast<float>());
        adam_g_.append_state(out, g_params_, "adam_g");
        adam_d_.append_state(out, d_params_, "adam_d");
        Tensor<float> st({8});
        st[0] = static_cast<float>(static_cast<int>(state_.phase));
        st[1] = static_cast<float>(static_cast<int>(state_.active));
        st[2] = static_cast<float>(state_.consecutive_steps);
        st[3] = static_cast<float>(state_.last_g_loss);
        st[4] = static_cast<float>(state_.last_d_loss);
        // Seed as 16-bit words, exact in f32.
        st[5] = static_cast<float>(cfg_.seed & 0xffffULL);
        st[6] = static_cast<float>((cfg_.seed >> 16) & 0xffffULL);
        st[7] = static_cast<float>((cfg_.seed >> 32) & 0xffffffffULL);
        out.add("state", std::move(st));
        return out;
    }

    void restore(const NetworkParams& source) {
        restore_params(g_params_, source, trainer_fingerprint());
        for (const auto& p : d_params_) {
            const Tensor<float>* t = source.find(p.name);
            if (!t) throw DataError("checkpoint incompatible: missing tensor " + p.name);
            if (t->shape() != p.value->shape())
                throw DataError("checkpoint incompatible: tensor " + p.name + " shape mismatch");
            *p.value = *t;
        }
        adam_g_.restore_state(source, g_params_, "adam_g");
        adam_d_.restore_state(source, d_params_, "adam_d");
        const Tensor<float>* st = source.find("state");
        if (!st || st->size() != 8)
            throw DataError("checkpoint incompatible: missing trainer state");
        state_.phase = static_cast<TrainPhase>(static_cast<int>((*st)[0]));
        state_.active = static_cast<ActiveNetwork>(static_cast<int>((*st)[1]));
        state_.consecutive_steps = static_cast<int>((*st)[2]);
        state_.last_g_loss = (*st)[3];
        state_.last_d_loss = (*st)[4];
        state_.iteration = static_cast<std::int64_t>(source.iteration);
        const std::uint64_t stored_seed = static_cast<std::uint64_t>((*st)[5]) +
                                          (static_cast<std::uint64_t>((*st)[6]) << 16) +
                                          (static_cast<std::uint64_t>((*st)[7]) << 32);
        if (stored_seed != cfg_.seed)
            throw DataError("checkpoint was produced with seed " + std::to_string(stored_seed) +
                            ", run configured with seed " + std::to_string(cfg_.seed));
    }

private:
    static Tensor<float> composite_image(const Tensor<float>& raw, const Tensor<float>& source,
                                          const Mask& mask) {
        Tensor<float> out = source;
        for (std::size_t i = 0; i < out.size(); ++i)
            if (mask[i]) out[i] = raw[i];
        return out;
    }

    float run_feature_loss(const Tensor<float>& real, const Tensor<float>& comp,
                           Tensor<float>* dcomp, std::int64_t iteration) {
        try {
            return feature_loss(extractor_, real, comp, dcomp);
        } catch (const NumericError& e) {
            throw NumericError("training diverged at iteration " + std::to_string(iteration + 1) +
                               ": " + e.what());
        }
    }

    const Tensor<float>& boundary_weight_cached(const Mask* mask) {
        auto it = boundary_cache_.find(mask);
        if (it == boundary_cache_.end())
            it = boundary_cache_.emplace(mask, boundary_weight<float>(*mask, cfg_.boundary_sigma))
                     .first;
        return it->second;
    }

    Generator<float> generator_;
    Discriminator<float> discriminator_;
    PerceptualExtractor<float> extractor_;
    GanTrainConfig cfg_;
    TrainState state_;
    std::vector<nn::NamedParam<float>> g_params_;
    std::vector<nn::NamedParam<float>> d_params_;
    nn::Adam<float> adam_g_;
    nn::Adam<float> adam_d_;
    std::map<const Mask*, Tensor<float>> boundary_cache_;
};

// Full two-phase run with metrics and checkpoint cadence. `on_row` sees every
// metrics row in order; checkpoints land in `checkpoint_dir` when nonempty.
struct GanRunResult {
    std::int64_t iterations = 0;
    std::string final_generator_checkpoint;
    std::string final_discriminator_checkpoint;
    std::string final_trainer_checkpoint;
};

inline GanRunResult run_gan_training(
    GanTrainer& trainer, const TrainingStream& stream, const std::string& checkpoint_dir,
    const std::function<void(const GanMetricsRow&)>& on_row,
    const std::function<void(const std::string&)>& on_note = nullptr,
    std::int64_t resume_from_iteration = -1) {
    namespace fs = std::filesystem;
    const GanTrainConfig& cfg = trainer.config();
    const std::int64_t total = cfg.pretrain_iters + cfg.joint_iters;
    if (!checkpoint_dir.empty()) fs::create_directories(checkpoint_dir);

    auto checkpoint_paths = [&](std::int64_t iter) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%08lld", static_cast<long long>(iter));
        const std::string tag(buf);
        return std::array<std::string, 3>{
            (fs::path(checkpoint_dir) / ("gen_" + tag + ".ckpt")).string(),
            (fs::path(checkpoint_dir) / ("disc_" + tag + ".ckpt")).string(),
            (fs::path(checkpoint_dir) / ("trainer_" + tag + ".ckpt")).string()};
    };

    GanRunResult result;
    auto save_all = [&](std::int64_t iter) {
        if (checkpoint_dir.empty()) return;
        const auto paths = checkpoint_paths(iter);
        save_checkpoint(paths[0], trainer.generator().to_params(static_cast<std::uint64_t>(iter)));
        save_checkpoint(paths[1],
                        trainer.discriminator().to_params(static_cast<std::uint64_t>(iter)));
        save_checkpoint(paths[2], trainer.trainer_checkpoint());
        result.final_generator_checkpoint = paths[0];
        result.final_discriminator_checkpoint = paths[1];
        result.final_trainer_checkpoint = paths[2];
    };

    if (resume_from_iteration >= 0) {
        const auto paths = checkpoint_paths(resume_from_iteration);
        trainer.restore(load_checkpoint(paths[2], trainer.trainer_fingerprint()));
    } else {
        trainer.init_networks();
    }

    while (trainer.state().iteration < total) {
        const std::int64_t it = trainer.state().iteration;
        GanMetricsRow row;
        if (it < cfg.pretrain_iters) {
            row = trainer.pretrain_step(stream);
        } else {
            bool forced = false;
            row = trainer.joint_step(stream, &forced);
            if (forced && on_note)
                on_note("forced alternation switch at iteration " + std::to_string(row.iteration) +
                        " after " + std::to_string(cfg.livelock_cap) + " consecutive steps");
        }
        if (on_row) on_row(row);
        const std::int64_t done = trainer.state().iteration;
        const bool phase_end = done == cfg.pretrain_iters || done == total;
        const bool cadence = cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0;
        if (phase_end || cadence) save_all(done);
    }
    if (total == 0) save_all(0);
    result.iterations = trainer.state().iteration;
    return result;
}

} // namespace cigan
