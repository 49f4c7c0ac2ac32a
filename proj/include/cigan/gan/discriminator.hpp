#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/core/sha256.hpp"
#include "cigan/data/patch.hpp"
#include "cigan/nn/layers.hpp"
#include "cigan/nn/params.hpp"

namespace cigan {

// Convolutional discriminator: 5 conv + 2x2 max-pool stages with kernel
// counts doubling 32 -> 512, LeakyReLU activations, then a single sigmoid
// unit. Class conditioning enters as two constant planes concatenated to
// the image (3 input channels).
struct DiscriminatorConfig {
    int input_resolution = 256;
    int first_kernels = 32;
    int n_conv_layers = 5;
    int kernel_size = 3;
    double leaky_slope = 0.2;

    std::vector<int> kernel_counts() const {
        std::vector<int> out;
        int k = first_kernels;
        for (int i = 0; i < n_conv_layers; ++i) {
            out.push_back(k);
            k *= 2;
        }
        return out;
    }

    int pooled_resolution() const { return input_resolution >> n_conv_layers; }

    void validate() const {
        if (n_conv_layers < 1) throw ConfigError("discriminator: n_conv_layers must be >= 1");
        if (first_kernels < 1) throw ConfigError("discriminator: first_kernels must be >= 1");
        if (kernel_size % 2 == 0 || kernel_size < 1)
            throw ConfigError("discriminator: kernel_size must be odd");
        if (input_resolution < 1 || input_resolution % (1 << n_conv_layers) != 0)
            throw ConfigError("discriminator: input_resolution must be divisible by 2^" +
                              std::to_string(n_conv_layers));
        if (leaky_slope <= 0.0 || leaky_slope >= 1.0)
            throw ConfigError("discriminator: leaky_slope must be in (0,1)");
    }

    std::string canonical() const {
        return "discriminator;res=" + std::to_string(input_resolution) +
               ";first=" + std::to_string(first_kernels) +
               ";layers=" + std::to_string(n_conv_layers) +
               ";ksize=" + std::to_string(kernel_size) +
               ";slope=" + std::to_string(leaky_slope);
    }

    Fingerprint fingerprint() const { return sha256_bytes(canonical()); }
};

template <typename T>
class Discriminator {
public:
    struct Trace {
        std::vector<Tensor<T>> conv_in; // input of each conv stage
        std::vector<Tensor<T>> act;     // leaky output (pool input)
        std::vector<Tensor<int>> argmax;
        Tensor<T> flat;                 // dense input
        T prob = T(0);
    };

    explicit Discriminator(DiscriminatorConfig config) : cfg_(std::move(config)) {
        cfg_.validate();
        int in_ch = 3;
        for (int k : cfg_.kernel_counts()) {
            convs_.push_back(nn::Conv2d<T>(in_ch, k, cfg_.kernel_size));
            in_ch = k;
        }
        const int side = cfg_.pooled_resolution();
        fc_ = nn::Dense<T>(in_ch * side * side, 1);
    }

    const DiscriminatorConfig& config() const { return cfg_; }

    void init(std::uint64_t seed) {
        Rng rng(derive_seed(seed, "discriminator-init"));
        for (auto& conv : convs_) conv.init_he_uniform(rng);
        fc_.init_he_uniform(rng);
    }

    // P(real | image, class) in (0,1).
    T forward(const Tensor<T>& image, LesionClass cond_class, Trace* trace = nullptr) const {
        require_image2d(image, "discriminate");
        if (image.dim(0) != cfg_.input_resolution || image.dim(1) != cfg_.input_resolution)
            throw InvalidInputError("discriminate: image must be " +
                                    std::to_string(cfg_.input_resolution) + " square");
        Trace local;
        Trace& tr = trace ? *trace : local;
        const int f = cfg_.input_resolution;
        Tensor<T> x({3, f, f});
        const T non_mal = cond_class == LesionClass::non_malignant ? T(1) : T(0);
        for (int r = 0; r < f; ++r) {
            for (int c = 0; c < f; ++c) {
                x.at(0, r, c) = image.at(r, c);
                x.at(1, r, c) = non_mal;
                x.at(2, r, c) = T(1) - non_mal;
            }
        }
        tr.conv_in.clear();
        tr.act.clear();
        tr.argmax.clear();
        const T slope = static_cast<T>(cfg_.leaky_slope);
        for (auto& conv : convs_) {
            tr.conv_in.push_back(x);
            Tensor<T> act = nn::leaky_relu_forward(conv.forward(x), slope);
            Tensor<int> argmax;
            x = nn::maxpool2_forward(act, argmax);
            tr.act.push_back(std::move(act));
            tr.argmax.push_back(std::move(argmax));
        }
        Tensor<T> flat({static_cast<int>(x.size())});
        std::copy(x.begin(), x.end(), flat.begin());
        tr.flat = flat;
        const Tensor<T> logit = fc_.forward(flat);
        const T prob = T(1) / (T(1) + std::exp(-logit[0]));
        tr.prob = prob;
        return prob;
    }

    // Backprop dL/dprob; optionally accumulates parameter gradients and/or
    // returns the gradient w.r.t. the input image plane.
    Tensor<T> backward(const Trace& trace, T dprob, bool need_dimage, bool accumulate_grads) {
        const T p = trace.prob;
        return backward_logit(trace, dprob * p * (T(1) - p), need_dimage, accumulate_grads);
    }

    // Backprop dL/dlogit directly. Log-loss gradients reduce to bounded
    // expressions in the logit (p-1, p), which stays stable when the sigmoid
    // saturates in float.
    Tensor<T> backward_logit(const Trace& trace, T dlogit_value, bool need_dimage,
                             bool accumulate_grads) {
        Tensor<T> dlogit({1});
        dlogit[0] = dlogit_value;
        Tensor<T> dflat = fc_.backward(trace.flat, dlogit, true, accumulate_grads);
        const int side = cfg_.pooled_resolution();
        const int last_ch = convs_.back().out_ch;
        Tensor<T> d({last_ch, side, side});
        std::copy(dflat.begin(), dflat.end(), d.begin());
        const T slope = static_cast<T>(cfg_.leaky_slope);
        for (std::size_t i = convs_.size(); i-- > 0;) {
            const int h = trace.act[i].dim(1), w = trace.act[i].dim(2);
            Tensor<T> dact = nn::maxpool2_backward(trace.argmax[i], d, h, w);
            Tensor<T> dpre = nn::leaky_relu_backward(trace.act[i], dact, slope);
            const bool need_dx = i > 0 || need_dimage;
            d = convs_[i].backward(trace.conv_in[i], dpre, need_dx, accumulate_grads);
        }
        Tensor<T> dimage;
        if (need_dimage) {
            const int f = cfg_.input_resolution;
            dimage = Tensor<T>({f, f});
            for (int r = 0; r < f; ++r)
                for (int c = 0; c < f; ++c)
                    dimage.at(r, c) = d.at(0, r, c);
        }
        return dimage;
    }

    std::vector<nn::NamedParam<T>> params() {
        std::vector<nn::NamedParam<T>> out;
        for (std::size_t i = 0; i < convs_.size(); ++i)
            convs_[i].collect(out, "d.conv" + std::to_string(i));
        fc_.collect(out, "d.fc");
        return out;
    }

    void zero_grads() {
        for (auto& conv : convs_) conv.zero_grads();
        fc_.zero_grads();
    }

    std::size_t parameter_count() const {
        std::size_t n = fc_.parameter_count();
        for (const auto& conv : convs_) n += conv.parameter_count();
        return n;
    }

    std::vector<int> layer_kernel_counts() const {
        std::vector<int> out;
        for (const auto& conv : convs_) out.push_back(conv.out_ch);
        return out;
    }

    NetworkParams to_params(std::uint64_t iteration = 0) {
        return snapshot_params(params(), cfg_.fingerprint(), iteration);
    }

    void load(const NetworkParams& source) {
        restore_params(params(), source, cfg_.fingerprint());
    }

private:
    DiscriminatorConfig cfg_;
    std::vector<nn::Conv2d<T>> convs_;
    nn::Dense<T> fc_;
};

// Spec-level convenience: score one image with a checkpointed discriminator.
inline double discriminate(const NetworkParams& params, const DiscriminatorConfig& config,
                           const Tensor<float>& image, LesionClass cond_class) {
    Discriminator<float> disc(config);
    disc.load(params);
    return static_cast<double>(disc.forward(image, cond_class));
}

} // namespace cigan
