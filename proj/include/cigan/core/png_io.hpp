#pragma once

#include <cstdio>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "cigan/core/errors.hpp"
#include "cigan/core/image.hpp"
#include "cigan/core/tensor.hpp"

namespace cigan {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace detail

// Reads an 8- or 16-bit grayscale PNG into [0,1] floats (value / bit-depth max).
inline Tensor<float> read_png_gray(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open PNG for reading: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt or unreadable PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("expected grayscale PNG: " + path);
    }
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_swap(png); // file is big-endian
    png_read_update_info(png, info);

    const int out_depth = depth == 16 ? 16 : 8;
    const std::size_t row_bytes = static_cast<std::size_t>(w) * (out_depth / 8);
    std::vector<std::uint8_t> raster(static_cast<std::size_t>(h) * row_bytes);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 r = 0; r < h; ++r) rows[r] = raster.data() + r * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor<float> img({static_cast<int>(h), static_cast<int>(w)});
    if (out_depth == 8) {
        for (std::size_t i = 0; i < img.size(); ++i)
            img[i] = static_cast<float>(raster[i]) / 255.0f;
    } else {
        const auto* p = reinterpret_cast<const std::uint16_t*>(raster.data());
        for (std::size_t i = 0; i < img.size(); ++i)
            img[i] = static_cast<float>(p[i]) / 65535.0f;
    }
    return img;
}

namespace detail {

inline void write_png_gray_raw(const std::string& path, const std::uint8_t* raster,
                               int h, int w, int depth) {
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot open PNG for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (depth == 16) png_set_swap(png);
    const std::size_t row_bytes = static_cast<std::size_t>(w) * (depth / 8);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int r = 0; r < h; ++r)
        rows[static_cast<std::size_t>(r)] = const_cast<png_bytep>(raster) + r * row_bytes;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace detail

inline void write_png_gray8(const std::string& path, const Tensor<float>& img) {
    require_image2d(img, "write_png_gray8");
    std::vector<std::uint8_t> raster(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const float v = std::min(std::max(img[i], 0.0f), 1.0f);
        raster[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    detail::write_png_gray_raw(path, raster.data(), img.dim(0), img.dim(1), 8);
}

inline void write_png_gray16(const std::string& path, const Tensor<float>& img) {
    require_image2d(img, "write_png_gray16");
    std::vector<std::uint16_t> raster(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const float v = std::min(std::max(img[i], 0.0f), 1.0f);
        raster[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
    }
    detail::write_png_gray_raw(path, reinterpret_cast<const std::uint8_t*>(raster.data()),
                               img.dim(0), img.dim(1), 16);
}

// Masks are stored as 8-bit PNGs with values {0,255} mapped to {0,1}.
inline void write_png_mask(const std::string& path, const Mask& mask) {
    require_binary_mask(mask, "write_png_mask");
    std::vector<std::uint8_t> raster(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        raster[i] = mask[i] ? 255 : 0;
    detail::write_png_gray_raw(path, raster.data(), mask.dim(0), mask.dim(1), 8);
}

inline Mask read_png_mask(const std::string& path) {
    const Tensor<float> img = read_png_gray(path);
    Mask mask({img.dim(0), img.dim(1)});
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (img[i] == 0.0f) {
            mask[i] = 0;
        } else if (img[i] == 1.0f) {
            mask[i] = 1;
        } else {
            throw DataError("mask PNG must contain only {0,255} values: " + path);
        }
    }
    return mask;
}

} // namespace cigan
