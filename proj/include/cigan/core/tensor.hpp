#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cigan/core/errors.hpp"

namespace cigan {

// Dense row-major tensor of rank 1..4. Images are {H,W}, feature maps
// {C,H,W}, conv weights {Cout,Cin,Kh,Kw}.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
        std::size_t n = 1;
        for (int d : shape_) {
            if (d <= 0) throw InvalidInputError("tensor dimensions must be positive");
            n *= static_cast<std::size_t>(d);
        }
        data_.assign(n, fill);
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(int a, int b) { return data_[idx2(a, b)]; }
    const T& at(int a, int b) const { return data_[idx2(a, b)]; }
    T& at(int a, int b, int c) { return data_[idx3(a, b, c)]; }
    const T& at(int a, int b, int c) const { return data_[idx3(a, b, c)]; }
    T& at(int a, int b, int c, int d) { return data_[idx4(a, b, c, d)]; }
    const T& at(int a, int b, int c, int d) const { return data_[idx4(a, b, c, d)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor zeros_like() const { return Tensor(shape_); }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i)
            out[i] = static_cast<U>(data_[i]);
        return out;
    }

    std::string shape_string() const {
        std::string s = "{";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "}";
    }

private:
    std::size_t idx2(int a, int b) const {
        return static_cast<std::size_t>(a) * shape_[1] + b;
    }
    std::size_t idx3(int a, int b, int c) const {
        return (static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c;
    }
    std::size_t idx4(int a, int b, int c, int d) const {
        return ((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (const T& v : t)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <typename T>
bool all_in_unit_range(const Tensor<T>& t) {
    for (const T& v : t)
        if (!(v >= T(0) && v <= T(1))) return false;
    return true;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw InvalidInputError("max_abs_diff: shape mismatch");
    T m = T(0);
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, static_cast<T>(std::abs(a[i] - b[i])));
    return m;
}

} // namespace cigan
