#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cigan/core/errors.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/core/tensor.hpp"

namespace cigan::nn {

using cigan::Tensor;

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatrixRM<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

// Handle to a learnable tensor and its gradient accumulator.
template <typename T>
struct NamedParam {
    std::string name;
    Tensor<T>* value;
    Tensor<T>* grad;
};

namespace detail {

template <typename T>
void im2col(const Tensor<T>& x, int k, MatrixRM<T>& col) {
    const int ch = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int pad = (k - 1) / 2;
    col.resize(ch * k * k, h * w);
    for (int c = 0; c < ch; ++c) {
        const T* plane = x.data() + static_cast<std::size_t>(c) * h * w;
        for (int dy = 0; dy < k; ++dy) {
            for (int dx = 0; dx < k; ++dx) {
                T* row = col.data() + static_cast<std::size_t>((c * k + dy) * k + dx) * (h * w);
                for (int r = 0; r < h; ++r) {
                    const int sr = r + dy - pad;
                    if (sr < 0 || sr >= h) {
                        for (int q = 0; q < w; ++q) row[r * w + q] = T(0);
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(sr) * w;
                    for (int q = 0; q < w; ++q) {
                        const int sq = q + dx - pad;
                        row[r * w + q] = (sq < 0 || sq >= w) ? T(0) : src[sq];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const MatrixRM<T>& dcol, int ch, int h, int w, int k, Tensor<T>& dx) {
    const int pad = (k - 1) / 2;
    for (int c = 0; c < ch; ++c) {
        T* plane = dx.data() + static_cast<std::size_t>(c) * h * w;
        for (int dy = 0; dy < k; ++dy) {
            for (int dx_k = 0; dx_k < k; ++dx_k) {
                const T* row = dcol.data() +
                               static_cast<std::size_t>((c * k + dy) * k + dx_k) * (h * w);
                for (int r = 0; r < h; ++r) {
                    const int sr = r + dy - pad;
                    if (sr < 0 || sr >= h) continue;
                    T* dst = plane + static_cast<std::size_t>(sr) * w;
                    for (int q = 0; q < w; ++q) {
                        const int sq = q + dx_k - pad;
                        if (sq >= 0 && sq < w) dst[sq] += row[r * w + q];
                    }
                }
            }
        }
    }
}

} // namespace detail

// 3x3 (odd-k) same-padding convolution, stride 1, implemented as
// im2col + GEMM. Gradients accumulate across a batch until zero_grads().
template <typename T>
struct Conv2d {
    int in_ch = 0, out_ch = 0, ksize = 3;
    Tensor<T> w, b, gw, gb;

    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int k = 3)
        : in_ch(in_channels), out_ch(out_channels), ksize(k),
          w({out_channels, in_channels, k, k}), b({out_channels}),
          gw({out_channels, in_channels, k, k}), gb({out_channels}) {
        if (k % 2 == 0) throw ConfigError("conv kernel size must be odd");
    }

    void init_he_uniform(Rng& rng) {
        const double fan_in = static_cast<double>(in_ch) * ksize * ksize;
        const double limit = std::sqrt(6.0 / fan_in);
        for (auto& v : w) v = static_cast<T>(rng.uniform(-limit, limit));
        b.fill(T(0));
    }

    std::size_t parameter_count() const { return w.size() + b.size(); }

    Tensor<T> forward(const Tensor<T>& x) const {
        if (x.rank() != 3 || x.dim(0) != in_ch)
            throw InvalidInputError("conv forward: input shape mismatch");
        const int h = x.dim(1), q = x.dim(2);
        MatrixRM<T> col;
        detail::im2col(x, ksize, col);
        Tensor<T> y({out_ch, h, q});
        ConstMapRM<T> wmat(w.data(), out_ch, in_ch * ksize * ksize);
        MapRM<T> ymat(y.data(), out_ch, h * q);
        ymat.noalias() = wmat * col;
        for (int c = 0; c < out_ch; ++c) ymat.row(c).array() += b[static_cast<std::size_t>(c)];
        return y;
    }

    // x is the forward input; returns dx when need_dx.
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, bool need_dx,
                       bool accumulate_grads = true) {
        const int h = x.dim(1), q = x.dim(2);
        MatrixRM<T> col;
        detail::im2col(x, ksize, col);
        ConstMapRM<T> dymat(dy.data(), out_ch, h * q);
        if (accumulate_grads) {
            MapRM<T> gwmat(gw.data(), out_ch, in_ch * ksize * ksize);
            gwmat.noalias() += dymat * col.transpose();
            for (int c = 0; c < out_ch; ++c) gb[static_cast<std::size_t>(c)] += dymat.row(c).sum();
        }
        Tensor<T> dx;
        if (need_dx) {
            ConstMapRM<T> wmat(w.data(), out_ch, in_ch * ksize * ksize);
            MatrixRM<T> dcol(in_ch * ksize * ksize, h * q);
            dcol.noalias() = wmat.transpose() * dymat;
            dx = Tensor<T>({in_ch, h, q});
            detail::col2im_add(dcol, in_ch, h, q, ksize, dx);
        }
        return dx;
    }

    // Input gradient only; usable on frozen layers.
    Tensor<T> backward_input_only(const Tensor<T>& x, const Tensor<T>& dy) const {
        const int h = x.dim(1), q = x.dim(2);
        MatrixRM<T> col; // reused as dcol
        ConstMapRM<T> dymat(dy.data(), out_ch, h * q);
        ConstMapRM<T> wmat(w.data(), out_ch, in_ch * ksize * ksize);
        col.resize(in_ch * ksize * ksize, h * q);
        col.noalias() = wmat.transpose() * dymat;
        Tensor<T> dx({in_ch, h, q});
        detail::col2im_add(col, in_ch, h, q, ksize, dx);
        return dx;
    }

    void zero_grads() {
        gw.fill(T(0));
        gb.fill(T(0));
    }

    void collect(std::vector<NamedParam<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

template <typename T>
struct Dense {
    int in_dim = 0, out_dim = 0;
    Tensor<T> w, b, gw, gb;

    Dense() = default;
    Dense(int in, int out)
        : in_dim(in), out_dim(out), w({out, in}), b({out}), gw({out, in}), gb({out}) {}

    void init_he_uniform(Rng& rng) {
        const double limit = std::sqrt(6.0 / in_dim);
        for (auto& v : w) v = static_cast<T>(rng.uniform(-limit, limit));
        b.fill(T(0));
    }

    std::size_t parameter_count() const { return w.size() + b.size(); }

    Tensor<T> forward(const Tensor<T>& x) const {
        if (static_cast<int>(x.size()) != in_dim)
            throw InvalidInputError("dense forward: input size mismatch");
        Tensor<T> y({out_dim});
        ConstMapRM<T> wmat(w.data(), out_dim, in_dim);
        ConstVecMap<T> xv(x.data(), in_dim);
        VecMap<T> yv(y.data(), out_dim);
        yv.noalias() = wmat * xv;
        for (int i = 0; i < out_dim; ++i) y[static_cast<std::size_t>(i)] += b[static_cast<std::size_t>(i)];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, bool need_dx,
                       bool accumulate_grads = true) {
        ConstVecMap<T> xv(x.data(), in_dim);
        ConstVecMap<T> dyv(dy.data(), out_dim);
        if (accumulate_grads) {
            MapRM<T> gwmat(gw.data(), out_dim, in_dim);
            gwmat.noalias() += dyv * xv.transpose();
            for (int i = 0; i < out_dim; ++i) gb[static_cast<std::size_t>(i)] += dy[static_cast<std::size_t>(i)];
        }
        Tensor<T> dx;
        if (need_dx) {
            dx = Tensor<T>({in_dim});
            ConstMapRM<T> wmat(w.data(), out_dim, in_dim);
            VecMap<T> dxv(dx.data(), in_dim);
            dxv.noalias() = wmat.transpose() * dyv;
        }
        return dx;
    }

    void zero_grads() {
        gw.fill(T(0));
        gb.fill(T(0));
    }

    void collect(std::vector<NamedParam<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y) v = v > T(0) ? v : T(0);
    return y;
}

// Uses the forward output to gate; exact except on the measure-zero set x == 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy) {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!(y[i] > T(0))) dx[i] = T(0);
    return dx;
}

template <typename T>
Tensor<T> leaky_relu_forward(const Tensor<T>& x, T slope) {
    Tensor<T> y = x;
    for (auto& v : y) v = v > T(0) ? v : slope * v;
    return y;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& y, const Tensor<T>& dy, T slope) {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!(y[i] > T(0))) dx[i] *= slope;
    return dx;
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y) v = T(1) / (T(1) + std::exp(-v));
    return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& dy) {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] *= y[i] * (T(1) - y[i]);
    return dx;
}

// 2x2 max pooling, stride 2. argmax stores the flat in-plane index of each
// window's winner for the backward scatter.
template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& x, Tensor<int>& argmax) {
    const int ch = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % 2 != 0 || w % 2 != 0)
        throw InvalidInputError("maxpool2: spatial dims must be even");
    const int oh = h / 2, ow = w / 2;
    Tensor<T> y({ch, oh, ow});
    argmax = Tensor<int>({ch, oh, ow});
    for (int c = 0; c < ch; ++c) {
        const T* plane = x.data() + static_cast<std::size_t>(c) * h * w;
        for (int r = 0; r < oh; ++r) {
            for (int q = 0; q < ow; ++q) {
                int best = (2 * r) * w + 2 * q;
                T best_v = plane[best];
                const int cand[3] = {(2 * r) * w + 2 * q + 1, (2 * r + 1) * w + 2 * q,
                                     (2 * r + 1) * w + 2 * q + 1};
                for (int idx : cand) {
                    if (plane[idx] > best_v) {
                        best_v = plane[idx];
                        best = idx;
                    }
                }
                y.at(c, r, q) = best_v;
                argmax.at(c, r, q) = best;
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<int>& argmax, const Tensor<T>& dy, int h, int w) {
    const int ch = dy.dim(0), oh = dy.dim(1), ow = dy.dim(2);
    Tensor<T> dx({ch, h, w});
    for (int c = 0; c < ch; ++c) {
        T* plane = dx.data() + static_cast<std::size_t>(c) * h * w;
        for (int r = 0; r < oh; ++r)
            for (int q = 0; q < ow; ++q)
                plane[argmax.at(c, r, q)] += dy.at(c, r, q);
    }
    return dx;
}

template <typename T>
Tensor<T> upsample_nearest2_forward(const Tensor<T>& x) {
    const int ch = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor<T> y({ch, 2 * h, 2 * w});
    for (int c = 0; c < ch; ++c)
        for (int r = 0; r < 2 * h; ++r)
            for (int q = 0; q < 2 * w; ++q)
                y.at(c, r, q) = x.at(c, r / 2, q / 2);
    return y;
}

template <typename T>
Tensor<T> upsample_nearest2_backward(const Tensor<T>& dy) {
    const int ch = dy.dim(0), h2 = dy.dim(1), w2 = dy.dim(2);
    Tensor<T> dx({ch, h2 / 2, w2 / 2});
    for (int c = 0; c < ch; ++c)
        for (int r = 0; r < h2; ++r)
            for (int q = 0; q < w2; ++q)
                dx.at(c, r / 2, q / 2) += dy.at(c, r, q);
    return dx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw InvalidInputError("concat_channels: spatial dims differ");
    Tensor<T> y({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.begin(), a.end(), y.begin());
    std::copy(b.begin(), b.end(), y.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return y;
}

// First `lead_ch` channels of a concat gradient.
template <typename T>
Tensor<T> take_leading_channels(const Tensor<T>& dy, int lead_ch) {
    Tensor<T> out({lead_ch, dy.dim(1), dy.dim(2)});
    std::copy(dy.begin(), dy.begin() + static_cast<std::ptrdiff_t>(out.size()), out.begin());
    return out;
}

template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x) {
    const int ch = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor<T> y({ch});
    const T inv = T(1) / static_cast<T>(h * w);
    for (int c = 0; c < ch; ++c) {
        T acc = T(0);
        const T* plane = x.data() + static_cast<std::size_t>(c) * h * w;
        for (int i = 0; i < h * w; ++i) acc += plane[i];
        y[static_cast<std::size_t>(c)] = acc * inv;
    }
    return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& dy, int h, int w) {
    const int ch = static_cast<int>(dy.size());
    Tensor<T> dx({ch, h, w});
    const T inv = T(1) / static_cast<T>(h * w);
    for (int c = 0; c < ch; ++c) {
        T* plane = dx.data() + static_cast<std::size_t>(c) * h * w;
        const T g = dy[static_cast<std::size_t>(c)] * inv;
        for (int i = 0; i < h * w; ++i) plane[i] = g;
    }
    return dx;
}

} // namespace cigan::nn
