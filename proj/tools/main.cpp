// cigan: conditional-infilling GAN pipeline CLI.
//
// Stage commands communicate only through files: phantom -> patches ->
// train-gan -> synthesize -> train-classifier (x schemes) -> evaluate.
// Every run directory gets a config.snapshot with the effective seed
// recorded under [run], sufficient to reproduce the run byte-for-byte.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "cigan/cigan.hpp"

namespace fs = std::filesystem;
using namespace cigan;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// ---------------------------------------------------------------------------
// config readers (one per section, unknown keys rejected)

GeneratorConfig read_generator_config(const ConfigFile& cfg) {
    cfg.reject_unknown_keys("generator",
                            {"base_resolution", "final_resolution", "kernels", "kernel_size"});
    GeneratorConfig g;
    g.base_resolution = static_cast<int>(cfg.get_int_or("generator.base_resolution", 4));
    g.final_resolution = static_cast<int>(cfg.get_int_or("generator.final_resolution", 256));
    if (cfg.has("generator.kernels")) {
        g.block_kernel_counts.clear();
        for (auto k : cfg.get_int_array("generator.kernels"))
            g.block_kernel_counts.push_back(static_cast<int>(k));
    }
    g.kernel_size = static_cast<int>(cfg.get_int_or("generator.kernel_size", 3));
    g.validate();
    return g;
}

DiscriminatorConfig read_discriminator_config(const ConfigFile& cfg) {
    cfg.reject_unknown_keys("discriminator", {"input_resolution", "first_kernels", "n_conv_layers",
                                              "kernel_size", "leaky_slope"});
    DiscriminatorConfig d;
    d.input_resolution = static_cast<int>(cfg.get_int_or("discriminator.input_resolution", 256));
    d.first_kernels = static_cast<int>(cfg.get_int_or("discriminator.first_kernels", 32));
    d.n_conv_layers = static_cast<int>(cfg.get_int_or("discriminator.n_conv_layers", 5));
    d.kernel_size = static_cast<int>(cfg.get_int_or("discriminator.kernel_size", 3));
    d.leaky_slope = cfg.get_double_or("discriminator.leaky_slope", 0.2);
    d.validate();
    return d;
}

ExtractorConfig read_extractor_config(const ConfigFile& cfg) {
    cfg.reject_unknown_keys("extractor", {"channels", "kernel_size", "seed", "weights_file"});
    ExtractorConfig e;
    if (cfg.has("extractor.channels")) {
        e.channels.clear();
        for (auto c : cfg.get_int_array("extractor.channels"))
            e.channels.push_back(static_cast<int>(c));
    }
    e.kernel_size = static_cast<int>(cfg.get_int_or("extractor.kernel_size", 3));
    e.init_seed = static_cast<std::uint64_t>(cfg.get_int_or("extractor.seed", 0));
    e.weights_file = cfg.get_string_or("extractor.weights_file", "");
    e.validate();
    return e;
}

LossWeights read_loss_weights(const ConfigFile& cfg) {
    cfg.reject_unknown_keys("loss", {"adversarial", "feature", "boundary", "sigma"});
    LossWeights w;
    w.adversarial = cfg.get_double_or("loss.adversarial", 1.0);
    w.feature = cfg.get_double_or("loss.feature", 10.0);
    w.boundary = cfg.get_double_or("loss.boundary", 10000.0);
    w.validate();
    return w;
}

GanTrainConfig read_gan_train_config(const ConfigFile& cfg, std::uint64_t seed) {
    cfg.reject_unknown_keys("gan_train",
                            {"lr", "beta1", "beta2", "eps", "batch_size", "pretrain_iters",
                             "joint_iters", "switch_threshold", "checkpoint_every", "livelock_cap",
                             "seed"});
    GanTrainConfig t;
    t.adam.lr = cfg.get_double_or("gan_train.lr", 1e-4);
    t.adam.beta1 = cfg.get_double_or("gan_train.beta1", 0.9);
    t.adam.beta2 = cfg.get_double_or("gan_train.beta2", 0.999);
    t.adam.eps = cfg.get_double_or("gan_train.eps", 1e-8);
    t.batch_size = static_cast<int>(cfg.get_int_or("gan_train.batch_size", 8));
    t.pretrain_iters = cfg.get_int_or("gan_train.pretrain_iters", 10000);
    t.joint_iters = cfg.get_int_or("gan_train.joint_iters", 100000);
    t.switch_threshold = cfg.get_double_or("gan_train.switch_threshold", 0.3);
    t.checkpoint_every = cfg.get_int_or("gan_train.checkpoint_every", 0);
    t.livelock_cap = static_cast<int>(cfg.get_int_or("gan_train.livelock_cap", 500));
    t.boundary_sigma = cfg.get_double_or("loss.sigma", 10.0);
    t.weights = read_loss_weights(cfg);
    t.seed = seed;
    t.validate();
    return t;
}

ClassifierConfig read_classifier_config(const ConfigFile& cfg) {
    cfg.reject_unknown_keys("classifier",
                            {"architecture", "init", "weights_file", "lr", "beta1", "beta2", "eps",
                             "batch_size", "iterations", "lr_decay", "decay_every",
                             "input_resolution", "channels", "val_every", "seed"});
    ClassifierConfig c;
    c.architecture = cfg.get_string_or("classifier.architecture", "small-cnn");
    c.init = cfg.get_string_or("classifier.init", "seeded-random");
    c.weights_file = cfg.get_string_or("classifier.weights_file", "");
    c.adam.lr = cfg.get_double_or("classifier.lr", 1e-5);
    c.adam.beta1 = cfg.get_double_or("classifier.beta1", 0.9);
    c.adam.beta2 = cfg.get_double_or("classifier.beta2", 0.999);
    c.adam.eps = cfg.get_double_or("classifier.eps", 1e-8);
    c.batch_size = static_cast<int>(cfg.get_int_or("classifier.batch_size", 32));
    c.iterations = cfg.get_int_or("classifier.iterations", 10000);
    c.lr_decay = cfg.get_double_or("classifier.lr_decay", 0.9);
    c.decay_every = cfg.get_int_or("classifier.decay_every", 2000);
    c.input_resolution = static_cast<int>(cfg.get_int_or("classifier.input_resolution", 256));
    if (cfg.has("classifier.channels")) {
        c.conv_channels.clear();
        for (auto ch : cfg.get_int_array("classifier.channels"))
            c.conv_channels.push_back(static_cast<int>(ch));
    }
    c.validate();
    return c;
}

CurriculumSchedule read_curriculum(const ConfigFile& cfg) {
    cfg.reject_unknown_keys("curriculum", {"base_real_fraction", "step_every", "growth", "cap",
                                           "additive", "additive_step"});
    CurriculumSchedule s;
    s.base_real_fraction = cfg.get_double_or("curriculum.base_real_fraction", 0.5);
    s.step_every = cfg.get_int_or("curriculum.step_every", 1000);
    s.growth = cfg.get_double_or("curriculum.growth", 1.2);
    s.cap = cfg.get_double_or("curriculum.cap", 0.9);
    s.additive = cfg.get_bool_or("curriculum.additive", false);
    s.additive_step = cfg.get_double_or("curriculum.additive_step", 0.2);
    s.validate();
    return s;
}

AugmentationPolicy read_augmentation(const ConfigFile& cfg) {
    cfg.reject_unknown_keys("augmentation",
                            {"max_rotation_deg", "flip_prob", "rescale_min", "rescale_max"});
    AugmentationPolicy p;
    p.max_rotation_deg = cfg.get_double_or("augmentation.max_rotation_deg", 30.0);
    p.flip_prob = cfg.get_double_or("augmentation.flip_prob", 0.5);
    p.rescale_min = cfg.get_double_or("augmentation.rescale_min", 0.75);
    p.rescale_max = cfg.get_double_or("augmentation.rescale_max", 1.25);
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// run directory helpers

std::uint64_t effective_seed(const ConfigFile& cfg, const std::optional<std::uint64_t>& flag,
                             const std::string& stage_key) {
    if (flag) return *flag;
    if (cfg.has("run.seed")) return static_cast<std::uint64_t>(cfg.get_int("run.seed"));
    if (cfg.has(stage_key)) return static_cast<std::uint64_t>(cfg.get_int(stage_key));
    return 0;
}

void write_snapshot(const std::string& run_dir, const std::string& config_path,
                    const std::string& command, std::uint64_t seed,
                    const std::string& extra = "") {
    std::string text = config_path.empty() ? std::string() : read_text_file(config_path);
    // Drop a previous [run] record when re-snapshotting a snapshot.
    const auto pos = text.find("\n# --- run record ---");
    if (pos != std::string::npos) text.resize(pos + 1);
    text += "\n# --- run record ---\n[run]\ncommand = \"" + command + "\"\nseed = " +
            std::to_string(seed) + "\n" + extra;
    write_text_file((fs::path(run_dir) / "config.snapshot").string(), text);
}

void require_empty_or_force(const std::string& out, bool force) {
    if (!fs::exists(out)) return;
    if (fs::is_directory(out) && fs::directory_iterator(out) == fs::directory_iterator()) return;
    if (!force)
        throw ConfigError("output path " + out + " exists and is not empty (use --force)");
}

std::vector<ArchivePatch> load_archive_checked(const std::string& dir) {
    if (dir.empty()) throw ConfigError("data.patches: no patch archive configured");
    return read_patch_archive(dir);
}

std::vector<Patch> split_patches(const std::vector<ArchivePatch>& archive, Split split) {
    std::vector<Patch> out;
    for (const auto& ap : archive)
        if (ap.split == split) out.push_back(ap.patch);
    return out;
}

// ---------------------------------------------------------------------------
// commands

int cmd_phantom(int n, const std::string& size, double lesion_rate, std::uint64_t seed,
                const std::string& out, bool force) {
    if (n < 1) throw ConfigError("--n must be >= 1");
    int h = 0, w = 0;
    if (std::sscanf(size.c_str(), "%dx%d", &h, &w) != 2 || h < 8 || w < 8)
        throw ConfigError("--size must look like 96x96");
    require_empty_or_force(out, force);

    const PhantomSet set = make_phantom_dataset(n, h, w, lesion_rate, seed);
    fs::create_directories(fs::path(out) / "images");
    fs::create_directories(fs::path(out) / "masks");
    for (std::size_t i = 0; i < set.images.size(); ++i) {
        const auto& ph = set.images[i];
        write_png_gray16((fs::path(out) / set.manifest.records[i].path).string(), ph.image);
        if (set.manifest.records[i].mask_path)
            write_png_mask((fs::path(out) / *set.manifest.records[i].mask_path).string(),
                           ph.lesion_mask);
    }
    write_manifest((fs::path(out) / "manifest.jsonl").string(), set.manifest);
    write_snapshot(out, "", "phantom", seed,
                   "n = " + std::to_string(n) + "\nsize = \"" + size + "\"\nlesion_rate = " +
                       format_number(lesion_rate) + "\n");
    std::cout << "phantom: wrote " << n << " images to " << out << "\n";
    return 0;
}

int cmd_patches(const std::string& manifest_path, std::int64_t count_per_class,
                std::uint64_t seed, const std::string& out, int patch_size, double tissue_threshold,
                double min_tissue, const std::string& target, bool force) {
    if (count_per_class < 1) throw ConfigError("--count-per-class must be >= 1");
    require_empty_or_force(out, force);
    int target_h = 1375, target_w = 750;
    if (!target.empty() && std::sscanf(target.c_str(), "%dx%d", &target_h, &target_w) != 2)
        throw ConfigError("--target must look like 1375x750 (or 0x0 to disable)");
    const bool do_resize = target_h > 0 && target_w > 0;

    const DatasetManifest manifest = read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    SamplingOptions opts;
    opts.patch_size = patch_size;
    opts.tissue_threshold = tissue_threshold;
    opts.min_tissue = min_tissue;

    const std::size_t n_images = manifest.records.size();
    const std::size_t per_image =
        std::max<std::size_t>(1, (2 * static_cast<std::size_t>(count_per_class) + n_images - 1) /
                                     n_images);

    std::array<std::array<std::vector<ArchivePatch>, 3>, 2> buckets; // [class][split]
    std::size_t total_attempts = 0, total_accepted = 0;
    for (const auto& rec : manifest.records) {
        Tensor<float> image = read_png_gray((base / rec.path).string());
        std::vector<Annotation> annotations;
        if (rec.mask_path) {
            Annotation a;
            a.mask = read_png_mask((base / *rec.mask_path).string());
            a.label = LesionClass::malignant;
            if (do_resize) {
                // Resize the mask with the image and re-binarize.
                const Tensor<float> resized_img = resize_to_target(image, target_h, target_w);
                Tensor<float> fm({a.mask.dim(0), a.mask.dim(1)});
                for (std::size_t i = 0; i < fm.size(); ++i)
                    fm[i] = static_cast<float>(a.mask[i]);
                const Tensor<float> rm =
                    bilinear_resize(fm, resized_img.dim(0), resized_img.dim(1));
                a.mask = Mask({resized_img.dim(0), resized_img.dim(1)});
                for (std::size_t i = 0; i < a.mask.size(); ++i) a.mask[i] = rm[i] > 0.5f ? 1 : 0;
                image = resized_img;
            }
            annotations.push_back(std::move(a));
        } else if (do_resize) {
            image = resize_to_target(image, target_h, target_w);
        }

        std::size_t attempts = 0;
        std::vector<Patch> sampled = sample_patches(image, annotations, per_image,
                                                    derive_seed(seed, "img", fnv1a64(rec.id)),
                                                    rec.id, opts, &attempts);
        total_attempts += attempts;
        total_accepted += sampled.size();
        for (auto& p : sampled) {
            ArchivePatch ap;
            ap.patch = std::move(p);
            ap.split = rec.split; // patches inherit their source image's split
            buckets[static_cast<std::size_t>(ap.patch.label)][static_cast<std::size_t>(ap.split)]
                .push_back(std::move(ap));
        }
    }

    // Trim each class to the quota, preserving split proportions by taking
    // records in their sampled order.
    std::vector<ArchivePatch> kept;
    for (int cls = 0; cls < 2; ++cls) {
        std::size_t taken = 0;
        for (int s = 0; s < 3 && taken < static_cast<std::size_t>(count_per_class); ++s) {
            auto& bucket = buckets[static_cast<std::size_t>(cls)][static_cast<std::size_t>(s)];
            for (auto& ap : bucket) {
                if (taken >= static_cast<std::size_t>(count_per_class)) break;
                kept.push_back(std::move(ap));
                ++taken;
            }
        }
        if (taken < static_cast<std::size_t>(count_per_class))
            std::cerr << "patches: warning: class "
                      << to_string(static_cast<LesionClass>(cls)) << " under quota (" << taken
                      << "/" << count_per_class << ")\n";
    }

    fs::create_directories(out);
    write_patch_archive(out, kept, seed, manifest.split_fractions);
    write_snapshot(out, "", "patches", seed,
                   "manifest = \"" + manifest_path + "\"\ncount_per_class = " +
                       std::to_string(count_per_class) + "\npatch_size = " +
                       std::to_string(patch_size) + "\n");
    std::cout << "patches: accepted " << total_accepted << "/" << total_attempts
              << " windows (acceptance rate "
              << format_number(total_attempts
                                   ? static_cast<double>(total_accepted) / total_attempts
                                   : 0.0)
              << "), kept " << kept.size() << " -> " << out << "\n";
    return 0;
}

int cmd_train_gan(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                  const std::string& out, std::int64_t resume_iter) {
    const ConfigFile cfg = ConfigFile::parse_file(config_path);
    const std::uint64_t seed = effective_seed(cfg, seed_flag, "gan_train.seed");

    GeneratorConfig gen_cfg = read_generator_config(cfg);
    DiscriminatorConfig disc_cfg = read_discriminator_config(cfg);
    ExtractorConfig ext_cfg = read_extractor_config(cfg);
    GanTrainConfig train_cfg = read_gan_train_config(cfg, seed);

    const auto archive = load_archive_checked(cfg.get_string_or("data.patches", ""));
    TrainingStream stream(split_patches(archive, Split::train), seed);

    fs::create_directories(out);
    write_snapshot(out, config_path, "train-gan", seed);

    const std::string metrics_path = (fs::path(out) / "metrics.csv").string();
    if (resume_iter >= 0) {
        // Keep rows up to the resume point; the continued run appends after.
        if (fs::exists(metrics_path)) {
            const auto lines = read_lines(metrics_path);
            std::string head;
            for (const auto& line : lines) {
                if (line.empty()) continue;
                if (line == GanMetricsRow::csv_header()) {
                    head += line + "\n";
                    continue;
                }
                const auto cells = split_csv_line(line);
                if (!cells.empty() && std::stoll(cells[0]) <= resume_iter) head += line + "\n";
            }
            write_text_file(metrics_path, head);
        }
    }
    CsvWriter metrics(metrics_path, GanMetricsRow::csv_header(), resume_iter >= 0);
    std::ofstream log((fs::path(out) / "trainer.log").string(),
                      resume_iter >= 0 ? std::ios::app : std::ios::trunc);

    GanTrainer trainer(gen_cfg, disc_cfg, ext_cfg, train_cfg);
    const GanRunResult result = run_gan_training(
        trainer, stream, (fs::path(out) / "checkpoints").string(),
        [&](const GanMetricsRow& row) { metrics.row(row.csv_cells()); },
        [&](const std::string& note) { log << note << "\n"; }, resume_iter);
    metrics.flush();
    std::cout << "train-gan: " << result.iterations << " iterations, final checkpoint "
              << result.final_generator_checkpoint << "\n";
    return 0;
}

int cmd_synthesize(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                   const std::string& out) {
    const ConfigFile cfg = ConfigFile::parse_file(config_path);
    cfg.reject_unknown_keys("synthesize", {"checkpoint", "reposition", "seed"});
    const std::uint64_t seed = effective_seed(cfg, seed_flag, "synthesize.seed");
    const std::string ckpt_path = cfg.get_string("synthesize.checkpoint");

    GeneratorConfig gen_cfg = read_generator_config(cfg);
    Generator<float> gen(gen_cfg);
    const NetworkParams params = load_checkpoint(ckpt_path, gen_cfg.fingerprint());
    gen.load(params);

    const auto archive = load_archive_checked(cfg.get_string_or("data.patches", ""));
    std::vector<Patch> train;
    for (const auto& ap : archive) {
        if (ap.split != Split::train) continue;
        Patch p = ap.patch;
        train.push_back(std::move(p));
    }
    if (train.empty()) throw DataError("synthesize: patch archive has no train split");

    SynthesizeOptions opts;
    opts.reposition_donor_masks = cfg.get_bool_or("synthesize.reposition", false);
    const std::vector<Patch> synthetic = synthesize_dataset(train, gen, seed, opts);

    std::vector<ArchivePatch> out_patches;
    const std::string fp_hex = hex_string(params.fingerprint);
    for (auto& p : synthetic) {
        ArchivePatch ap;
        ap.patch = p;
        ap.split = Split::train;
        ap.checkpoint = fp_hex;
        out_patches.push_back(std::move(ap));
    }
    fs::create_directories(out);
    write_patch_archive(out, out_patches, seed);
    write_snapshot(out, config_path, "synthesize", seed);
    std::cout << "synthesize: wrote " << out_patches.size() << " synthetic patches to " << out
              << "\n";
    return 0;
}

int cmd_train_classifier(const std::string& config_path, const std::string& scheme_name,
                         std::optional<std::uint64_t> seed_flag, const std::string& out) {
    const ConfigFile cfg = ConfigFile::parse_file(config_path);
    const std::uint64_t seed = effective_seed(cfg, seed_flag, "classifier.seed");
    const AugmentationScheme scheme = scheme_from_string(scheme_name);

    ClassifierConfig cls_cfg = read_classifier_config(cfg);
    CurriculumSchedule schedule = read_curriculum(cfg);
    AugmentationPolicy policy = read_augmentation(cfg);
    const std::int64_t val_every = cfg.get_int_or("classifier.val_every", 500);

    const auto archive = load_archive_checked(cfg.get_string_or("data.patches", ""));
    ClassifierDatasets data;
    for (const auto& ap : archive) {
        std::vector<Patch>* sink = ap.split == Split::train ? &data.train
                                   : ap.split == Split::val ? &data.val
                                                            : &data.test;
        sink->push_back(ap.patch);
    }
    if (scheme == AugmentationScheme::cigan_traditional) {
        const std::string synth_dir = cfg.get_string_or("data.synthetic", "");
        if (synth_dir.empty())
            throw ConfigError("data.synthetic: required for the cigan+traditional scheme");
        for (const auto& ap : read_patch_archive(synth_dir)) {
            if (ap.split != Split::train) continue;
            data.synthetic.push_back(ap.patch);
        }
    }

    fs::create_directories(out);
    write_snapshot(out, config_path, "train-classifier", seed,
                   "scheme = \"" + std::string(to_string(scheme)) + "\"\n");
    CsvWriter metrics((fs::path(out) / "metrics.csv").string(),
                      ClassifierMetricsRow::csv_header());
    const ClassifierRunResult result = train_classifier(
        scheme, data, cls_cfg, schedule, policy, seed,
        [&](const ClassifierMetricsRow& row) { metrics.row(row.csv_cells()); }, val_every);
    metrics.flush();

    fs::create_directories(fs::path(out) / "checkpoints");
    save_checkpoint((fs::path(out) / "checkpoints/best.ckpt").string(), result.best_params);
    write_scores_csv((fs::path(out) / "scores.csv").string(), result.test_scores);
    std::cout << "train-classifier[" << to_string(scheme) << "]: best iteration "
              << result.best_iteration;
    if (result.best_val_auc) std::cout << " (val AUC " << format_number(*result.best_val_auc) << ")";
    std::cout << ", scored " << result.test_scores.size() << " test patches\n";
    return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& out) {
    const ConfigFile cfg = ConfigFile::parse_file(config_path);
    cfg.reject_unknown_keys("evaluate",
                            {"runs", "schemes", "grid_examples", "gan_checkpoint", "grid_seed"});
    const auto run_dirs = cfg.get_string_array("evaluate.runs");
    const auto schemes = cfg.get_string_array("evaluate.schemes");
    if (run_dirs.size() != schemes.size() || run_dirs.empty())
        throw ConfigError("evaluate.runs and evaluate.schemes must align and be nonempty");

    std::vector<SchemeScores> runs;
    for (std::size_t i = 0; i < run_dirs.size(); ++i) {
        SchemeScores s;
        s.scheme = schemes[i];
        const std::string scores_path = (fs::path(run_dirs[i]) / "scores.csv").string();
        if (!fs::exists(scores_path))
            throw DataError("evaluate: missing scores file " + scores_path);
        s.scores = read_scores_csv(scores_path);
        const std::string best = (fs::path(run_dirs[i]) / "checkpoints/best.ckpt").string();
        if (fs::exists(best)) s.checkpoint_hex = hex_string(load_checkpoint(best).fingerprint);
        runs.push_back(std::move(s));
    }

    const EvalReport report = build_report(runs);
    fs::create_directories(out);
    fs::create_directories(fs::path(out) / "figures");
    write_text_file((fs::path(out) / "report.txt").string(), render_report_text(report));
    write_text_file((fs::path(out) / "report.csv").string(), render_report_csv(report));

    for (const auto& run : runs) {
        std::vector<int> labels;
        std::vector<double> scores;
        for (const auto& rec : run.scores) {
            labels.push_back(rec.label);
            scores.push_back(rec.score);
        }
        std::string name = run.scheme;
        for (auto& c : name)
            if (c == '+' || c == ' ') c = '_';
        render_roc_png((fs::path(out) / ("figures/roc_" + name + ".png")).string(), labels,
                       scores);
    }

    // Sample grid: original | generator input | synthetic opposite class.
    const std::string gan_ckpt = cfg.get_string_or("evaluate.gan_checkpoint", "");
    const std::string patches_dir = cfg.get_string_or("data.patches", "");
    if (!gan_ckpt.empty() && !patches_dir.empty()) {
        const std::uint64_t grid_seed =
            static_cast<std::uint64_t>(cfg.get_int_or("evaluate.grid_seed", 0));
        const int n_examples = static_cast<int>(cfg.get_int_or("evaluate.grid_examples", 4));
        GeneratorConfig gen_cfg = read_generator_config(cfg);
        Generator<float> gen(gen_cfg);
        gen.load(load_checkpoint(gan_ckpt, gen_cfg.fingerprint()));

        const auto archive = load_archive_checked(patches_dir);
        std::vector<Mask> donor_masks;
        for (const auto& ap : archive)
            if (ap.split == Split::train && ap.patch.label == LesionClass::malignant &&
                mask_popcount(ap.patch.mask) > 0)
                donor_masks.push_back(ap.patch.mask);

        std::vector<std::vector<Tensor<float>>> grid;
        // Prefer held-out patches, alternating classes when available.
        std::vector<const ArchivePatch*> chosen;
        for (int want_malignant = 1; want_malignant >= 0; --want_malignant) {
            for (const auto& ap : archive) {
                if (static_cast<int>(chosen.size()) >= n_examples) break;
                if (ap.split != Split::test) continue;
                const bool is_mal = ap.patch.label == LesionClass::malignant;
                if (is_mal != (want_malignant == 1)) continue;
                if (is_mal && mask_popcount(ap.patch.mask) == 0) continue;
                chosen.push_back(&ap);
                if (chosen.size() % 2 == 0) break; // alternate classes
            }
        }
        for (const auto& ap : archive) {
            if (static_cast<int>(chosen.size()) >= n_examples) break;
            if (ap.split == Split::test &&
                std::find(chosen.begin(), chosen.end(), &ap) == chosen.end())
                chosen.push_back(&ap);
        }
        std::uint64_t idx = 0;
        for (const ArchivePatch* ap : chosen) {
            const Patch& src = ap->patch;
            Mask mask;
            LesionClass target;
            if (src.label == LesionClass::malignant && mask_popcount(src.mask) > 0) {
                mask = src.mask;
                target = LesionClass::non_malignant;
            } else if (!donor_masks.empty()) {
                mask = transplant_mask(src, donor_masks, derive_seed(grid_seed, "grid", idx));
                target = LesionClass::malignant;
            } else {
                continue;
            }
            const ConditionedInput input =
                build_conditioned_input(src, mask, target, derive_seed(grid_seed, "gridnoise", idx));
            const Tensor<float> raw = gen.forward(input.channels);
            const Patch syn = composite(raw, src, mask, target);
            Tensor<float> corrupted({src.image.dim(0), src.image.dim(1)});
            for (int r = 0; r < corrupted.dim(0); ++r)
                for (int c = 0; c < corrupted.dim(1); ++c)
                    corrupted.at(r, c) = input.channels.at(0, r, c);
            grid.push_back({src.image, corrupted, syn.image});
            ++idx;
        }
        if (!grid.empty())
            render_sample_grid((fs::path(out) / "figures/samples.png").string(), grid);
    }

    write_snapshot(out, config_path, "evaluate", 0);
    std::cout << render_report_text(report);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional-infilling GAN pipeline for lesion-classification augmentation"};
    app.require_subcommand(1);

    // phantom
    auto* phantom = app.add_subcommand("phantom", "generate a phantom dataset");
    int ph_n = 10;
    std::string ph_size = "96x96";
    double ph_rate = 0.5;
    std::uint64_t ph_seed = 0;
    std::string ph_out;
    bool ph_force = false;
    phantom->add_option("--n", ph_n, "number of images");
    phantom->add_option("--size", ph_size, "image size HxW");
    phantom->add_option("--lesion-rate", ph_rate, "fraction of images with lesions");
    phantom->add_option("--seed", ph_seed, "rng seed");
    phantom->add_option("--out", ph_out, "output directory")->required();
    phantom->add_flag("--force", ph_force, "overwrite a non-empty output directory");

    // patches
    auto* patches = app.add_subcommand("patches", "extract patches from a manifest");
    std::string pa_manifest, pa_out, pa_target = "1375x750";
    std::int64_t pa_count = 100;
    std::uint64_t pa_seed = 0;
    int pa_size = 256;
    double pa_tissue_threshold = 0.05, pa_min_tissue = 0.75;
    bool pa_force = false;
    patches->add_option("--manifest", pa_manifest, "dataset manifest (JSONL)")->required();
    patches->add_option("--count-per-class", pa_count, "accepted patches per class");
    patches->add_option("--seed", pa_seed, "rng seed");
    patches->add_option("--out", pa_out, "output patch archive directory")->required();
    patches->add_option("--patch-size", pa_size, "square patch size");
    patches->add_option("--tissue-threshold", pa_tissue_threshold, "tissue intensity threshold");
    patches->add_option("--min-tissue", pa_min_tissue, "required tissue fraction");
    patches->add_option("--target", pa_target, "resize target HxW (0x0 disables)");
    patches->add_flag("--force", pa_force, "overwrite a non-empty output directory");

    // train-gan
    auto* train_gan = app.add_subcommand("train-gan", "train the conditional infilling GAN");
    std::string tg_config, tg_out;
    std::optional<std::uint64_t> tg_seed;
    std::int64_t tg_resume = -1;
    train_gan->add_option("--config", tg_config, "experiment config (TOML)")->required();
    train_gan->add_option("--seed", tg_seed, "seed override");
    train_gan->add_option("--out", tg_out, "run directory")->required();
    train_gan->add_option("--resume", tg_resume, "resume from checkpoint iteration");

    // synthesize
    auto* synthesize = app.add_subcommand("synthesize", "synthesize the opposite-class dataset");
    std::string sy_config, sy_out;
    std::optional<std::uint64_t> sy_seed;
    synthesize->add_option("--config", sy_config, "experiment config (TOML)")->required();
    synthesize->add_option("--seed", sy_seed, "seed override");
    synthesize->add_option("--out", sy_out, "output patch archive directory")->required();

    // train-classifier
    auto* train_cls = app.add_subcommand("train-classifier", "train the patch classifier");
    std::string tc_config, tc_scheme, tc_out;
    std::optional<std::uint64_t> tc_seed;
    train_cls->add_option("--config", tc_config, "experiment config (TOML)")->required();
    train_cls->add_option("--scheme", tc_scheme, "none | traditional | cigan+traditional")
        ->required();
    train_cls->add_option("--seed", tc_seed, "seed override");
    train_cls->add_option("--out", tc_out, "run directory")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "build the AUC/DeLong report and figures");
    std::string ev_config, ev_out;
    evaluate->add_option("--config", ev_config, "experiment config (TOML)")->required();
    evaluate->add_option("--out", ev_out, "report directory")->required();

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(phantom))
            return cmd_phantom(ph_n, ph_size, ph_rate, ph_seed, ph_out, ph_force);
        if (app.got_subcommand(patches))
            return cmd_patches(pa_manifest, pa_count, pa_seed, pa_out, pa_size,
                               pa_tissue_threshold, pa_min_tissue, pa_target, pa_force);
        if (app.got_subcommand(train_gan))
            return cmd_train_gan(tg_config, tg_seed, tg_out, tg_resume);
        if (app.got_subcommand(synthesize)) return cmd_synthesize(sy_config, sy_seed, sy_out);
        if (app.got_subcommand(train_cls))
            return cmd_train_classifier(tc_config, tc_scheme, tc_seed, tc_out);
        if (app.got_subcommand(evaluate)) return cmd_evaluate(ev_config, ev_out);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0; // --help
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const InvalidInputError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
