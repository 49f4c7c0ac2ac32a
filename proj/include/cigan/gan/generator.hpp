#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/image.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/core/sha256.hpp"
#include "cigan/data/patch.hpp"
#include "cigan/nn/layers.hpp"
#include "cigan/nn/params.hpp"

namespace cigan {

namespace detail {
inline bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }
} // namespace detail

// Cascading multi-scale generator: the 4-channel input stack is downsampled
// to the base resolution, passed through a convolutional block (two 3x3
// convs, ReLU), then repeatedly upsampled 2x (nearest neighbor) and
// concatenated with the stack resized to the new scale until the final
// resolution. A 1-channel sigmoid head emits the full frame.
struct GeneratorConfig {
    int base_resolution = 4;
    int final_resolution = 256;
    std::vector<int> block_kernel_counts = {128, 128, 64, 64, 32, 32, 32};
    int kernel_size = 3;
    int input_channels = 4;

    int num_blocks() const {
        int n = 1, s = base_resolution;
        while (s < final_resolution) {
            s *= 2;
            ++n;
        }
        return n;
    }

    void validate() const {
        if (!detail::is_power_of_two(base_resolution) || !detail::is_power_of_two(final_resolution))
            throw ConfigError("generator: resolutions must be powers of two");
        if (final_resolution < base_resolution)
            throw ConfigError("generator: final_resolution must be >= base_resolution");
        if (static_cast<int>(block_kernel_counts.size()) != num_blocks())
            throw ConfigError("generator: need " + std::to_string(num_blocks()) +
                              " kernel counts for " + std::to_string(base_resolution) + "->" +
                              std::to_string(final_resolution) + ", got " +
                              std::to_string(block_kernel_counts.size()));
        for (int k : block_kernel_counts)
            if (k < 1) throw ConfigError("generator: kernel counts must be positive");
        if (kernel_size % 2 == 0 || kernel_size < 1)
            throw ConfigError("generator: kernel_size must be odd");
    }

    std::string canonical() const {
        return "generator;base=" + std::to_string(base_resolution) +
               ";final=" + std::to_string(final_resolution) +
               ";kernels=" + detail::join_ints(block_kernel_counts) +
               ";ksize=" + std::to_string(kernel_size) +
               ";in_ch=" + std::to_string(input_channels);
    }

    Fingerprint fingerprint() const { return sha256_bytes(canonical()); }
};

template <typename T>
class Generator {
public:
    struct BlockTrace {
        Tensor<T> input; // concat(upsampled previous, stack at this scale)
        Tensor<T> h1;    // after conv1 + relu
        Tensor<T> h2;    // after conv2 + relu
    };
    struct Trace {
        std::vector<BlockTrace> blocks;
        Tensor<T> raw; // {F,F} sigmoid output
    };

    explicit Generator(GeneratorConfig config) : cfg_(std::move(config)) {
        cfg_.validate();
        const int n = cfg_.num_blocks();
        blocks_.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const int out_k = cfg_.block_kernel_counts[static_cast<std::size_t>(i)];
            const int in_ch = i == 0 ? cfg_.input_channels
                                     : cfg_.block_kernel_counts[static_cast<std::size_t>(i - 1)] +
                                           cfg_.input_channels;
            blocks_.push_back(Block{nn::Conv2d<T>(in_ch, out_k, cfg_.kernel_size),
                                    nn::Conv2d<T>(out_k, out_k, cfg_.kernel_size)});
        }
        head_ = nn::Conv2d<T>(cfg_.block_kernel_counts.back(), 1, cfg_.kernel_size);
    }

    const GeneratorConfig& config() const { return cfg_; }

    void init(std::uint64_t seed) {
        Rng rng(derive_seed(seed, "generator-init"));
        for (auto& blk : blocks_) {
            blk.conv1.init_he_uniform(rng);
            blk.conv2.init_he_uniform(rng);
        }
        head_.init_he_uniform(rng);
    }

    // Per-scale copies of the input stack (area averaging).
    std::vector<Tensor<T>> stack_pyramid(const Tensor<T>& stack) const {
        if (stack.rank() != 3 || stack.dim(0) != cfg_.input_channels ||
            stack.dim(1) != cfg_.final_resolution || stack.dim(2) != cfg_.final_resolution)
            throw InvalidInputError("generator: input stack must be {" +
                                    std::to_string(cfg_.input_channels) + "," +
                                    std::to_string(cfg_.final_resolution) + "," +
                                    std::to_string(cfg_.final_resolution) + "}");
        std::vector<Tensor<T>> pyramid;
        pyramid.reserve(static_cast<std::size_t>(cfg_.num_blocks()));
        int scale = cfg_.base_resolution;
        for (int i = 0; i < cfg_.num_blocks(); ++i) {
            pyramid.push_back(box_downsample(stack, cfg_.final_resolution / scale));
            scale *= 2;
        }
        return pyramid;
    }

    // Full-frame raw output in [0,1]; `trace` enables backward().
    Tensor<T> forward(const Tensor<T>& stack, Trace* trace = nullptr) const {
        const std::vector<Tensor<T>> pyramid = stack_pyramid(stack);
        Trace local;
        Trace& tr = trace ? *trace : local;
        tr.blocks.clear();
        tr.blocks.resize(blocks_.size());
        Tensor<T> carry;
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            BlockTrace& bt = tr.blocks[i];
            bt.input = i == 0 ? pyramid[i]
                              : nn::concat_channels(nn::upsample_nearest2_forward(carry), pyramid[i]);
            bt.h1 = nn::relu_forward(blocks_[i].conv1.forward(bt.input));
            bt.h2 = nn::relu_forward(blocks_[i].conv2.forward(bt.h1));
            carry = bt.h2;
        }
        Tensor<T> pre = head_.forward(tr.blocks.back().h2); // {1,F,F}
        const int f = cfg_.final_resolution;
        Tensor<T> raw({f, f});
        for (std::size_t i = 0; i < raw.size(); ++i)
            raw[i] = T(1) / (T(1) + std::exp(-pre[i]));
        tr.raw = raw;
        return raw;
    }

    // Accumulates parameter gradients from dL/draw ({F,F}).
    void backward(const Trace& trace, const Tensor<T>& draw) {
        const int f = cfg_.final_resolution;
        Tensor<T> dpre({1, f, f});
        for (std::size_t i = 0; i < dpre.size(); ++i) {
            const T y = trace.raw[i];
            dpre[i] = draw[i] * y * (T(1) - y);
        }
        Tensor<T> d = head_.backward(trace.blocks.back().h2, dpre, true);
        for (std::size_t i = blocks_.size(); i-- > 0;) {
            const BlockTrace& bt = trace.blocks[i];
            Tensor<T> dh2 = nn::relu_backward(bt.h2, d);
            Tensor<T> dh1 = blocks_[i].conv2.backward(bt.h1, dh2, true);
            Tensor<T> dh1a = nn::relu_backward(bt.h1, dh1);
            Tensor<T> dx = blocks_[i].conv1.backward(bt.input, dh1a, i > 0);
            if (i > 0) {
                const int prev_ch = cfg_.block_kernel_counts[i - 1];
                Tensor<T> dup = nn::take_leading_channels(dx, prev_ch);
                d = nn::upsample_nearest2_backward(dup);
            }
        }
    }

    std::vector<nn::NamedParam<T>> params() {
        std::vector<nn::NamedParam<T>> out;
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            blocks_[i].conv1.collect(out, "g.block" + std::to_string(i) + ".conv1");
            blocks_[i].conv2.collect(out, "g.block" + std::to_string(i) + ".conv2");
        }
        head_.collect(out, "g.head");
        return out;
    }

    void zero_grads() {
        for (auto& blk : blocks_) {
            blk.conv1.zero_grads();
            blk.conv2.zero_grads();
        }
        head_.zero_grads();
    }

    std::size_t parameter_count() const {
        std::size_t n = head_.parameter_count();
        for (const auto& blk : blocks_)
            n += blk.conv1.parameter_count() + blk.conv2.parameter_count();
        return n;
    }

    // Kernel count of each block's convolutions (for shape audits).
    std::vector<int> block_output_channels() const {
        std::vector<int> out;
        for (const auto& blk : blocks_) out.push_back(blk.conv2.out_ch);
        return out;
    }
    int head_output_channels() const { return head_.out_ch; }

    NetworkParams to_params(std::uint64_t iteration = 0) {
        return snapshot_params(params(), cfg_.fingerprint(), iteration);
    }

    void load(const NetworkParams& source) {
        restore_params(params(), source, cfg_.fingerprint());
    }

private:
    struct Block {
        nn::Conv2d<T> conv1;
        nn::Conv2d<T> conv2;
    };

    GeneratorConfig cfg_;
    std::vector<Block> blocks_;
    nn::Conv2d<T> head_;
};

// Paste-back compositing: generator output inside the mask, source patch
// outside. The result is flagged synthetic and labeled with the
// conditioning class.
inline Patch composite(const Tensor<float>& raw_output, const Patch& patch, const Mask& mask,
                       LesionClass conditioning_class) {
    require_image2d(raw_output, "composite");
    require_binary_mask(mask, "composite");
    if (raw_output.dim(0) != patch.image.dim(0) || raw_output.dim(1) != patch.image.dim(1) ||
        mask.dim(0) != patch.image.dim(0) || mask.dim(1) != patch.image.dim(1))
        throw InvalidInputError("composite: shape mismatch");
    Patch out;
    out.image = patch.image;
    for (std::size_t i = 0; i < out.image.size(); ++i)
        if (mask[i]) out.image[i] = raw_output[i];
    out.mask = mask;
    out.label = conditioning_class;
    out.source_id = patch.source_id;
    out.synthetic = true;
    return out;
}

// Spec-level convenience: run a checkpointed generator on one input.
inline Tensor<float> generate(const NetworkParams& params, const GeneratorConfig& config,
                              const ConditionedInput& input) {
    Generator<float> gen(config);
    gen.load(params);
    return gen.forward(input.channels);
}

} // namespace cigan
