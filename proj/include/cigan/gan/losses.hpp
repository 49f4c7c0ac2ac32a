#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/image.hpp"
#include "cigan/core/tensor.hpp"
#include "cigan/gan/extractor.hpp"

namespace cigan {

struct LossWeights {
    double adversarial = 1.0;
    double feature = 10.0;
    double boundary = 10000.0;

    void validate() const {
        if (!(adversarial >= 0.0) || !(feature >= 0.0) || !(boundary >= 0.0) ||
            !std::isfinite(adversarial) || !std::isfinite(feature) || !std::isfinite(boundary))
            throw ConfigError("loss weights must be finite and >= 0");
    }
};

// Perceptual distance: per tap layer the mean absolute difference of the
// feature maps, summed across the three taps. When `d_generated` is given
// it receives dLoss/dGenerated (same shape as the images).
template <typename T>
T feature_loss(const PerceptualExtractor<T>& extractor, const Tensor<T>& real,
               const Tensor<T>& generated, Tensor<T>* d_generated = nullptr) {
    if (!real.same_shape(generated))
        throw InvalidInputError("feature_loss: image shapes differ");
    const std::array<Tensor<T>, 3> real_taps = extractor.forward_taps(real);
    typename PerceptualExtractor<T>::Trace trace;
    const std::array<Tensor<T>, 3> gen_taps = extractor.forward_taps(generated, &trace);

    T loss = T(0);
    std::array<Tensor<T>, 3> dtaps;
    for (std::size_t l = 0; l < 3; ++l) {
        const Tensor<T>& a = real_taps[l];
        const Tensor<T>& b = gen_taps[l];
        const T inv_n = T(1) / static_cast<T>(a.size());
        T layer = T(0);
        if (d_generated) dtaps[l] = Tensor<T>(b.shape());
        for (std::size_t i = 0; i < a.size(); ++i) {
            const T diff = a[i] - b[i];
            layer += std::abs(diff) * inv_n;
            if (d_generated)
                dtaps[l][i] = diff > T(0) ? -inv_n : (diff < T(0) ? inv_n : T(0));
        }
        loss += layer;
    }
    if (!std::isfinite(static_cast<double>(loss)))
        throw NumericError("feature_loss: non-finite activations (divergence)");
    if (d_generated) *d_generated = extractor.backward_to_image(trace, dtaps);
    return loss;
}

// Batch adversarial losses (probabilities clamped to [eps, 1-eps]):
//   d_loss = -mean(log d_real) - mean(log(1 - d_fake))
//   g_loss = -mean(log d_fake)            (non-saturating form)
struct AdversarialLosses {
    double d_loss = 0.0;
    double g_loss = 0.0;
};

inline AdversarialLosses adversarial_losses(std::span<const double> d_real,
                                            std::span<const double> d_fake,
                                            double eps = 1e-7) {
    if (d_real.empty() || d_fake.empty())
        throw InvalidInputError("adversarial_losses: empty probability batch");
    auto clamp = [eps](double p) { return std::min(std::max(p, eps), 1.0 - eps); };
    AdversarialLosses out;
    double sum_real = 0.0;
    for (double p : d_real) sum_real += std::log(clamp(p));
    double sum_fake_c = 0.0, sum_fake = 0.0;
    for (double p : d_fake) {
        sum_fake_c += std::log(1.0 - clamp(p));
        sum_fake += std::log(clamp(p));
    }
    out.d_loss = -sum_real / static_cast<double>(d_real.size()) -
                 sum_fake_c / static_cast<double>(d_fake.size());
    out.g_loss = -sum_fake / static_cast<double>(d_fake.size());
    return out;
}

// Gaussian-smoothed mask boundary: morphological gradient (3x3) of the
// mask, blurred with sigma (kernel radius 3*sigma, reflective padding).
template <typename T = float>
Tensor<T> boundary_weight(const Mask& mask, double sigma = 10.0) {
    require_binary_mask(mask, "boundary_weight");
    const Mask boundary = morphological_gradient3(mask);
    Tensor<T> b({mask.dim(0), mask.dim(1)});
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<T>(boundary[i]);
    return gaussian_blur_reflect(b, sigma);
}

// Sum over pixels of |w * (real - generated)|.
template <typename T>
T boundary_loss(const Tensor<T>& real, const Tensor<T>& generated, const Tensor<T>& w,
                Tensor<T>* d_generated = nullptr) {
    if (!real.same_shape(generated) || !real.same_shape(w))
        throw InvalidInputError("boundary_loss: shape mismatch");
    T loss = T(0);
    if (d_generated) *d_generated = Tensor<T>(real.shape());
    for (std::size_t i = 0; i < real.size(); ++i) {
        const T diff = real[i] - generated[i];
        loss += std::abs(w[i] * diff);
        if (d_generated) {
            const T s = diff > T(0) ? T(-1) : (diff < T(0) ? T(1) : T(0));
            (*d_generated)[i] = std::abs(w[i]) * s;
        }
    }
    if (!std::isfinite(static_cast<double>(loss)))
        throw NumericError("boundary_loss: non-finite value");
    return loss;
}

inline double total_generator_loss(double adv, double feat, double bound,
                                   const LossWeights& weights) {
    if (!std::isfinite(adv) || !std::isfinite(feat) || !std::isfinite(bound))
        throw NumericError("total_generator_loss: non-finite term");
    return weights.adversarial * adv + weights.feature * feat + weights.boundary * bound;
}

} // namespace cigan
