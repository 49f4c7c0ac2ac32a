#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/sha256.hpp"
#include "cigan/core/tensor.hpp"
#include "cigan/nn/layers.hpp"

namespace cigan {

namespace detail {
inline std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}
} // namespace detail

// Serialization view of a network: named float tensors plus the fingerprint
// of the producing config and the training iteration.
struct NetworkParams {
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
    Fingerprint fingerprint{};
    std::uint64_t iteration = 0;

    const Tensor<float>* find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }

    Tensor<float>* find(const std::string& name) {
        for (auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }

    void add(std::string name, Tensor<float> t) {
        tensors.emplace_back(std::move(name), std::move(t));
    }

    void validate_finite() const {
        for (const auto& [n, t] : tensors)
            if (!all_finite(t)) throw NumericError("non-finite tensor in params: " + n);
    }
};

// Copies the registered parameter tensors of a network into a NetworkParams.
template <typename T>
NetworkParams snapshot_params(const std::vector<nn::NamedParam<T>>& params,
                              const Fingerprint& fingerprint, std::uint64_t iteration) {
    NetworkParams out;
    out.fingerprint = fingerprint;
    out.iteration = iteration;
    for (const auto& p : params)
        out.add(p.name, p.value->template cast<float>());
    return out;
}

// Restores registered parameters by name, checking fingerprint and shapes.
template <typename T>
void restore_params(const std::vector<nn::NamedParam<T>>& params, const NetworkParams& source,
                    const Fingerprint& expected_fingerprint) {
    if (source.fingerprint != expected_fingerprint)
        throw DataError("checkpoint incompatible: config fingerprint mismatch (expected " +
                        hex_string(expected_fingerprint) + ", got " +
                        hex_string(source.fingerprint) + ")");
    for (const auto& p : params) {
        const Tensor<float>* t = source.find(p.name);
        if (!t) throw DataError("checkpoint incompatible: missing tensor " + p.name);
        if (t->shape() != p.value->shape())
            throw DataError("checkpoint incompatible: tensor " + p.name + " has shape " +
                            t->shape_string() + ", expected " + p.value->shape_string());
        for (std::size_t i = 0; i < t->size(); ++i)
            (*p.value)[i] = static_cast<T>((*t)[i]);
    }
}

} // namespace cigan
