#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/core/sha256.hpp"
#include "cigan/nn/adam.hpp"
#include "cigan/nn/layers.hpp"
#include "cigan/nn/params.hpp"

namespace cigan {

// Patch classifier. The desk-scale architecture is four conv/ReLU/max-pool
// blocks, global average pooling and a single sigmoid unit. A full-scale
// backbone (resnet50-like with pretrained weights) is a recognized config
// value but needs an externally supplied module; this build ships small-cnn.
struct ClassifierConfig {
    std::string architecture = "small-cnn"; // or "resnet50-like"
    std::string init = "seeded-random";     // or "pretrained-backbone"
    std::string weights_file;               // required for pretrained-backbone
    nn::AdamConfig adam{1e-5, 0.9, 0.999, 1e-8};
    int batch_size = 32;
    std::int64_t iterations = 10000;
    double lr_decay = 0.9;
    std::int64_t decay_every = 2000;
    int input_resolution = 256;
    std::vector<int> conv_channels = {16, 32, 64, 128};

    void validate() const {
        if (architecture != "small-cnn" && architecture != "resnet50-like")
            throw ConfigError("classifier: architecture must be small-cnn or resnet50-like");
        if (architecture == "resnet50-like")
            throw ConfigError("classifier: resnet50-like requires an externally supplied "
                              "backbone module; this build provides small-cnn");
        if (init != "seeded-random" && init != "pretrained-backbone")
            throw ConfigError("classifier: init must be seeded-random or pretrained-backbone");
        if (init == "pretrained-backbone" && weights_file.empty())
            throw ConfigError("classifier: pretrained-backbone init requires weights_file");
        if (lr_decay <= 0.0 || lr_decay > 1.0)
            throw ConfigError("classifier: lr_decay must be in (0,1]");
        if (iterations < 1) throw ConfigError("classifier: iterations must be >= 1");
        if (decay_every < 1) throw ConfigError("classifier: decay_every must be >= 1");
        if (batch_size < 1) throw ConfigError("classifier: batch_size must be >= 1");
        if (conv_channels.empty()) throw ConfigError("classifier: conv_channels empty");
        const int div = 1 << static_cast<int>(conv_channels.size());
        if (input_resolution < div || input_resolution % div != 0)
            throw ConfigError("classifier: input_resolution must be divisible by 2^blocks");
    }

    double lr_at(std::int64_t iteration) const {
        const auto steps = static_cast<double>(iteration / decay_every);
        return adam.lr * std::pow(lr_decay, steps);
    }

    std::string canonical() const {
        return "classifier;arch=" + architecture + ";res=" + std::to_string(input_resolution) +
               ";channels=" + detail::join_ints(conv_channels);
    }

    Fingerprint fingerprint() const { return sha256_bytes(canonical()); }
};

template <typename T>
class SmallCnn {
public:
    struct Trace {
        std::vector<Tensor<T>> conv_in;
        std::vector<Tensor<T>> act;
        std::vector<Tensor<int>> argmax;
        Tensor<T> pooled; // global average pool output
        T prob = T(0);
    };

    explicit SmallCnn(ClassifierConfig config) : cfg_(std::move(config)) {
        cfg_.validate();
        int in_ch = 1;
        for (int c : cfg_.conv_channels) {
            convs_.push_back(nn::Conv2d<T>(in_ch, c, 3));
            in_ch = c;
        }
        fc_ = nn::Dense<T>(in_ch, 1);
    }

    const ClassifierConfig& config() const { return cfg_; }

    void init(std::uint64_t seed) {
        Rng rng(derive_seed(seed, "classifier-init"));
        for (auto& conv : convs_) conv.init_he_uniform(rng);
        fc_.init_he_uniform(rng);
    }

    T forward(const Tensor<T>& image, Trace* trace = nullptr) const {
        require_image2d(image, "classifier");
        if (image.dim(0) != cfg_.input_resolution || image.dim(1) != cfg_.input_resolution)
            throw InvalidInputError("classifier: image must be " +
                                    std::to_string(cfg_.input_resolution) + " square");
        Trace local;
        Trace& tr = trace ? *trace : local;
        Tensor<T> x({1, image.dim(0), image.dim(1)});
        std::copy(image.begin(), image.end(), x.begin());
        tr.conv_in.clear();
        tr.act.clear();
        tr.argmax.clear();
        for (auto& conv : convs_) {
            tr.conv_in.push_back(x);
            Tensor<T> act = nn::relu_forward(conv.forward(x));
            Tensor<int> argmax;
            x = nn::maxpool2_forward(act, argmax);
            tr.act.push_back(std::move(act));
            tr.argmax.push_back(std::move(argmax));
        }
        tr.pooled = nn::global_avg_pool_forward(x);
        const Tensor<T> logit = fc_.forward(tr.pooled);
        tr.prob = T(1) / (T(1) + std::exp(-logit[0]));
        return tr.prob;
    }

    void backward_logit(const Trace& trace, T dlogit_value) {
        Tensor<T> dlogit({1});
        dlogit[0] = dlogit_value;
        Tensor<T> dpooled = fc_.backward(trace.pooled, dlogit, true);
        const int side = cfg_.input_resolution >> static_cast<int>(convs_.size());
        Tensor<T> d = nn::global_avg_pool_backward(dpooled, side, side);
        for (std::size_t i = convs_.size(); i-- > 0;) {
            const int h = trace.act[i].dim(1), w = trace.act[i].dim(2);
            Tensor<T> dact = nn::maxpool2_backward(trace.argmax[i], d, h, w);
            Tensor<T> dpre = nn::relu_backward(trace.act[i], dact);
            d = convs_[i].backward(trace.conv_in[i], dpre, i > 0);
        }
    }

    std::vector<nn::NamedParam<T>> params() {
        std::vector<nn::NamedParam<T>> out;
        for (std::size_t i = 0; i < convs_.size(); ++i)
            convs_[i].collect(out, "c.conv" + std::to_string(i));
        fc_.collect(out, "c.fc");
        return out;
    }

    void zero_grads() {
        for (auto& conv : convs_) conv.zero_grads();
        fc_.zero_grads();
    }

    NetworkParams to_params(std::uint64_t iteration = 0) {
        return snapshot_params(params(), cfg_.fingerprint(), iteration);
    }

    void load(const NetworkParams& source) {
        restore_params(params(), source, cfg_.fingerprint());
    }

private:
    ClassifierConfig cfg_;
    std::vector<nn::Conv2d<T>> convs_;
    nn::Dense<T> fc_;
};

} // namespace cigan
