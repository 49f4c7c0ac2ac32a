#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/tensor.hpp"

namespace cigan {

using Mask = Tensor<std::uint8_t>;

template <typename T>
void require_image2d(const Tensor<T>& img, const char* what) {
    if (img.rank() != 2)
        throw InvalidInputError(std::string(what) + ": expected a 2-D image, got rank " +
                                std::to_string(img.rank()));
}

// Bilinear resampling with the pixel-center convention; source coordinates
// are clamped at the frame so edge rows/columns extend outward.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& img, int out_h, int out_w) {
    require_image2d(img, "bilinear_resize");
    if (out_h < 1 || out_w < 1)
        throw InvalidInputError("bilinear_resize: output dims must be positive");
    const int h = img.dim(0), w = img.dim(1);
    Tensor<T> out({out_h, out_w});
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int r = 0; r < out_h; ++r) {
        double fy = (r + 0.5) * sy - 0.5;
        fy = std::min(std::max(fy, 0.0), static_cast<double>(h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int c = 0; c < out_w; ++c) {
            double fx = (c + 0.5) * sx - 0.5;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * img.at(y0, x0) + wx * img.at(y0, x1);
            const double bot = (1.0 - wx) * img.at(y1, x0) + wx * img.at(y1, x1);
            out.at(r, c) = static_cast<T>((1.0 - wy) * top + wy * bot);
        }
    }
    return out;
}

// Average-pools {C,H,W} (or {H,W}) by an integer factor. Used to build the
// per-scale pyramid of the generator input stack.
template <typename T>
Tensor<T> box_downsample(const Tensor<T>& x, int factor) {
    if (factor < 1) throw InvalidInputError("box_downsample: factor must be >= 1");
    if (factor == 1) return x;
    const bool has_channels = x.rank() == 3;
    if (!has_channels && x.rank() != 2)
        throw InvalidInputError("box_downsample: expected rank 2 or 3");
    const int ch = has_channels ? x.dim(0) : 1;
    const int h = x.dim(has_channels ? 1 : 0);
    const int w = x.dim(has_channels ? 2 : 1);
    if (h % factor != 0 || w % factor != 0)
        throw InvalidInputError("box_downsample: dims not divisible by factor");
    const int oh = h / factor, ow = w / factor;
    Tensor<T> out(has_channels ? std::vector<int>{ch, oh, ow} : std::vector<int>{oh, ow});
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int c = 0; c < ch; ++c) {
        const T* src = x.data() + static_cast<std::size_t>(c) * h * w;
        T* dst = out.data() + static_cast<std::size_t>(c) * oh * ow;
        for (int r = 0; r < oh; ++r) {
            for (int q = 0; q < ow; ++q) {
                double acc = 0.0;
                for (int dr = 0; dr < factor; ++dr)
                    for (int dq = 0; dq < factor; ++dq)
                        acc += src[(r * factor + dr) * w + (q * factor + dq)];
                dst[r * ow + q] = static_cast<T>(acc * inv);
            }
        }
    }
    return out;
}

namespace detail {
inline int reflect_index(int i, int n) {
    // Half-sample reflection: -1 -> 0, n -> n-1.
    if (n == 1) return 0;
    const int period = 2 * n;
    i = ((i % period) + period) % period;
    return i < n ? i : period - 1 - i;
}
} // namespace detail

// Separable Gaussian blur with reflective padding. Radius defaults to
// ceil(3*sigma); the kernel is normalized to unit sum.
template <typename T>
Tensor<T> gaussian_blur_reflect(const Tensor<T>& img, double sigma, int radius = -1) {
    require_image2d(img, "gaussian_blur_reflect");
    if (sigma <= 0.0) return img;
    if (radius < 0) radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : kernel) v /= sum;

    const int h = img.dim(0), w = img.dim(1);
    Tensor<double> tmp({h, w});
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       img.at(r, detail::reflect_index(c + k, w));
            tmp.at(r, c) = acc;
        }
    }
    Tensor<T> out({h, w});
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       tmp.at(detail::reflect_index(r + k, h), c);
            out.at(r, c) = static_cast<T>(acc);
        }
    }
    return out;
}

// 3x3 morphological gradient (dilation minus erosion) of a binary mask.
// Pixels outside the frame count as background, so a mask touching the
// frame edge has a boundary there.
inline Mask morphological_gradient3(const Mask& mask) {
    require_image2d(mask, "morphological_gradient3");
    const int h = mask.dim(0), w = mask.dim(1);
    Mask out({h, w});
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            std::uint8_t dil = 0, ero = 1;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    const std::uint8_t v =
                        (rr >= 0 && rr < h && cc >= 0 && cc < w) ? mask.at(rr, cc) : 0;
                    dil = std::max(dil, v);
                    ero = std::min(ero, v);
                }
            }
            out.at(r, c) = static_cast<std::uint8_t>(dil - ero);
        }
    }
    return out;
}

template <typename T>
Tensor<T> hflip(const Tensor<T>& img) {
    require_image2d(img, "hflip");
    const int h = img.dim(0), w = img.dim(1);
    Tensor<T> out({h, w});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            out.at(r, c) = img.at(r, w - 1 - c);
    return out;
}

// Samples img at real coordinates with bilinear weights; out-of-frame
// reads contribute zero.
template <typename T>
T sample_bilinear_zero(const Tensor<T>& img, double fy, double fx) {
    const int h = img.dim(0), w = img.dim(1);
    const int y0 = static_cast<int>(std::floor(fy));
    const int x0 = static_cast<int>(std::floor(fx));
    const double wy = fy - y0, wx = fx - x0;
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
            const int y = y0 + dy, x = x0 + dx;
            if (y < 0 || y >= h || x < 0 || x >= w) continue;
            const double wgt = (dy ? wy : 1.0 - wy) * (dx ? wx : 1.0 - wx);
            acc += wgt * img.at(y, x);
        }
    }
    return static_cast<T>(acc);
}

// Rotates about the image center by `degrees` (counterclockwise in image
// row/col coordinates), zero fill outside the frame.
template <typename T>
Tensor<T> rotate_about_center(const Tensor<T>& img, double degrees) {
    require_image2d(img, "rotate_about_center");
    const int h = img.dim(0), w = img.dim(1);
    const double th = degrees * M_PI / 180.0;
    const double ct = std::cos(th), st = std::sin(th);
    const double cy = 0.5 * (h - 1), cx = 0.5 * (w - 1);
    Tensor<T> out({h, w});
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            // Inverse map: rotate destination by -theta.
            const double dy = r - cy, dx = c - cx;
            const double fy = cy + ct * dy + st * dx;
            const double fx = cx - st * dy + ct * dx;
            out.at(r, c) = sample_bilinear_zero(img, fy, fx);
        }
    }
    return out;
}

// Rescales about the center by `factor` and crops/pads back to the source
// frame, zero fill outside.
template <typename T>
Tensor<T> rescale_about_center(const Tensor<T>& img, double factor) {
    require_image2d(img, "rescale_about_center");
    if (factor <= 0.0) throw InvalidInputError("rescale_about_center: factor must be > 0");
    const int h = img.dim(0), w = img.dim(1);
    const double cy = 0.5 * (h - 1), cx = 0.5 * (w - 1);
    Tensor<T> out({h, w});
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double fy = cy + (r - cy) / factor;
            const double fx = cx + (c - cx) / factor;
            out.at(r, c) = sample_bilinear_zero(img, fy, fx);
        }
    }
    return out;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& img, int r0, int c0, int h, int w) {
    require_image2d(img, "crop");
    if (r0 < 0 || c0 < 0 || r0 + h > img.dim(0) || c0 + w > img.dim(1))
        throw InvalidInputError("crop: window outside image frame");
    Tensor<T> out({h, w});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            out.at(r, c) = img.at(r0 + r, c0 + c);
    return out;
}

inline std::size_t mask_popcount(const Mask& mask) {
    std::size_t n = 0;
    for (std::uint8_t v : mask) n += v;
    return n;
}

inline void require_binary_mask(const Mask& mask, const char* what) {
    require_image2d(mask, what);
    for (std::uint8_t v : mask)
        if (v > 1) throw InvalidInputError(std::string(what) + ": mask values must be 0 or 1");
}

} // namespace cigan
