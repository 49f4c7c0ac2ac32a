#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/tensor.hpp"
#include "cigan/nn/layers.hpp"
#include "cigan/nn/params.hpp"

namespace cigan::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Moment buffers align with the parameter list
// the optimizer was bound to; they round-trip through checkpoints so resumed
// runs continue bit-identically.
template <typename T>
class Adam {
public:
    Adam() = default;

    Adam(AdamConfig config, const std::vector<NamedParam<T>>& params) : cfg_(config) {
        bind(params);
    }

    void bind(const std::vector<NamedParam<T>>& params) {
        m_.clear();
        v_.clear();
        for (const auto& p : params) {
            m_.push_back(p.value->zeros_like());
            v_.push_back(p.value->zeros_like());
        }
    }

    const AdamConfig& config() const { return cfg_; }
    std::uint64_t step_count() const { return t_; }

    // Learning-rate schedules adjust lr between steps; moments carry over.
    void set_lr(double lr) { cfg_.lr = lr; }

    void step(const std::vector<NamedParam<T>>& params) {
        if (params.size() != m_.size())
            throw InvalidInputError("adam: parameter list does not match bound moments");
        ++t_;
        const double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& value = *params[i].value;
            const Tensor<T>& grad = *params[i].grad;
            Tensor<T>& m = m_[i];
            Tensor<T>& v = v_[i];
            for (std::size_t j = 0; j < value.size(); ++j) {
                const double g = static_cast<double>(grad[j]);
                if (!std::isfinite(g))
                    throw NumericError("adam: non-finite gradient in " + params[i].name);
                const double mj = cfg_.beta1 * static_cast<double>(m[j]) + (1.0 - cfg_.beta1) * g;
                const double vj = cfg_.beta2 * static_cast<double>(v[j]) + (1.0 - cfg_.beta2) * g * g;
                m[j] = static_cast<T>(mj);
                v[j] = static_cast<T>(vj);
                const double m_hat = mj / b1t;
                const double v_hat = vj / b2t;
                value[j] = static_cast<T>(static_cast<double>(value[j]) -
                                          cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps));
            }
        }
    }

    // Moment buffers and step counter under `prefix`, for checkpointing.
    // The counter is stored as two 16-bit words so it stays exact in f32.
    void append_state(NetworkParams& out, const std::vector<NamedParam<T>>& params,
                      const std::string& prefix) const {
        Tensor<float> t_words({2});
        t_words[0] = static_cast<float>(t_ & 0xffffULL);
        t_words[1] = static_cast<float>((t_ >> 16) & 0xffffffffULL);
        out.add(prefix + ".t", std::move(t_words));
        for (std::size_t i = 0; i < params.size(); ++i) {
            out.add(prefix + ".m." + params[i].name, m_[i].template cast<float>());
            out.add(prefix + ".v." + params[i].name, v_[i].template cast<float>());
        }
    }

    void restore_state(const NetworkParams& source, const std::vector<NamedParam<T>>& params,
                       const std::string& prefix) {
        bind(params);
        const Tensor<float>* t_words = source.find(prefix + ".t");
        if (!t_words || t_words->size() != 2)
            throw DataError("checkpoint incompatible: missing optimizer state " + prefix + ".t");
        t_ = static_cast<std::uint64_t>((*t_words)[0]) +
             (static_cast<std::uint64_t>((*t_words)[1]) << 16);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Tensor<float>* m = source.find(prefix + ".m." + params[i].name);
            const Tensor<float>* v = source.find(prefix + ".v." + params[i].name);
            if (!m || !v)
                throw DataError("checkpoint incompatible: missing optimizer moments for " +
                                params[i].name);
            if (m->shape() != params[i].value->shape() || v->shape() != params[i].value->shape())
                throw DataError("checkpoint incompatible: optimizer moment shape mismatch for " +
                                params[i].name);
            m_[i] = m->template cast<T>();
            v_[i] = v->template cast<T>();
        }
    }

private:
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<Tensor<T>> m_;
    std::vector<Tensor<T>> v_;
};

} // namespace cigan::nn
