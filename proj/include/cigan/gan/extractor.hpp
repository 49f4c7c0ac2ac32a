#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/core/sha256.hpp"
#include "cigan/nn/layers.hpp"
#include "cigan/nn/params.hpp"

namespace cigan {

// Frozen feature network for the perceptual loss: three conv/ReLU/max-pool
// stages with taps at the pooling outputs. Grayscale inputs are replicated
// to three channels so a pretrained RGB backbone can be plugged in through
// the same interface; the desk-scale default is seeded random weights.
enum class ExtractorProvenance { seeded_random, pretrained_backbone };

struct ExtractorConfig {
    std::vector<int> channels = {8, 16, 32};
    int kernel_size = 3;
    std::uint64_t init_seed = 0;
    std::string weights_file; // nonempty -> pretrained_backbone

    ExtractorProvenance provenance() const {
        return weights_file.empty() ? ExtractorProvenance::seeded_random
                                    : ExtractorProvenance::pretrained_backbone;
    }

    void validate() const {
        if (channels.size() != 3) throw ConfigError("extractor: exactly three tap stages");
        for (int c : channels)
            if (c < 1) throw ConfigError("extractor: channel counts must be positive");
        if (kernel_size % 2 == 0 || kernel_size < 1)
            throw ConfigError("extractor: kernel_size must be odd");
    }

    std::string canonical() const {
        return "extractor;channels=" + detail::join_ints(channels) +
               ";ksize=" + std::to_string(kernel_size);
    }

    Fingerprint fingerprint() const { return sha256_bytes(canonical()); }
};

template <typename T>
class PerceptualExtractor {
public:
    struct Trace {
        std::array<Tensor<T>, 3> conv_in;
        std::array<Tensor<T>, 3> act;
        std::array<Tensor<int>, 3> argmax;
        std::array<Tensor<T>, 3> taps;
    };

    explicit PerceptualExtractor(ExtractorConfig config) : cfg_(std::move(config)) {
        cfg_.validate();
        int in_ch = 3;
        for (int c : cfg_.channels) {
            convs_.push_back(nn::Conv2d<T>(in_ch, c, cfg_.kernel_size));
            in_ch = c;
        }
        Rng rng(derive_seed(cfg_.init_seed, "extractor-init"));
        for (auto& conv : convs_) conv.init_he_uniform(rng);
    }

    const ExtractorConfig& config() const { return cfg_; }

    // Tap outputs for a 2-D grayscale image; spatial size halves per stage.
    std::array<Tensor<T>, 3> forward_taps(const Tensor<T>& gray, Trace* trace = nullptr) const {
        require_image2d(gray, "extractor");
        const int h = gray.dim(0), w = gray.dim(1);
        if (h % 8 != 0 || w % 8 != 0)
            throw InvalidInputError("extractor: input dims must be divisible by 8");
        Trace local;
        Trace& tr = trace ? *trace : local;
        Tensor<T> x({3, h, w});
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                const T v = gray.at(r, c);
                x.at(0, r, c) = v;
                x.at(1, r, c) = v;
                x.at(2, r, c) = v;
            }
        }
        for (std::size_t i = 0; i < 3; ++i) {
            tr.conv_in[i] = x;
            Tensor<T> act = nn::relu_forward(convs_[i].forward(x));
            Tensor<int> argmax;
            x = nn::maxpool2_forward(act, argmax);
            tr.act[i] = std::move(act);
            tr.argmax[i] = std::move(argmax);
            tr.taps[i] = x;
        }
        return tr.taps;
    }

    // Backprop tap gradients to the grayscale input. Extractor weights are
    // frozen, so no parameter gradients exist.
    Tensor<T> backward_to_image(const Trace& trace, const std::array<Tensor<T>, 3>& dtaps) const {
        Tensor<T> d = dtaps[2];
        for (std::size_t i = 3; i-- > 0;) {
            const int h = trace.act[i].dim(1), w = trace.act[i].dim(2);
            Tensor<T> dact = nn::maxpool2_backward(trace.argmax[i], d, h, w);
            Tensor<T> dpre = nn::relu_backward(trace.act[i], dact);
            d = convs_[i].backward_input_only(trace.conv_in[i], dpre);
            if (i > 0) {
                // conv_in[i] is tap i-1; its gradient sums the downstream
                // path and the loss term on that tap.
                const Tensor<T>& inject = dtaps[i - 1];
                for (std::size_t j = 0; j < d.size(); ++j) d[j] += inject[j];
            }
        }
        const int h = trace.conv_in[0].dim(1), w = trace.conv_in[0].dim(2);
        Tensor<T> dgray({h, w});
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                dgray.at(r, c) = d.at(0, r, c) + d.at(1, r, c) + d.at(2, r, c);
        return dgray;
    }

    std::vector<nn::NamedParam<T>> params() {
        std::vector<nn::NamedParam<T>> out;
        for (std::size_t i = 0; i < convs_.size(); ++i)
            convs_[i].collect(out, "e.conv" + std::to_string(i));
        return out;
    }

    NetworkParams to_params() { return snapshot_params(params(), cfg_.fingerprint(), 0); }

    void load(const NetworkParams& source) {
        restore_params(params(), source, cfg_.fingerprint());
    }

private:
    ExtractorConfig cfg_;
    std::vector<nn::Conv2d<T>> convs_;
};

} // namespace cigan
