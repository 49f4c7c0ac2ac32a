#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "cigan/core/png_io.hpp"
#include "cigan/core/tensor.hpp"

namespace cigan {

// Montage with one row per example and one column per stage
// (original, generator input, synthetic output), 2px separators.
inline void render_sample_grid(const std::string& path,
                               const std::vector<std::vector<Tensor<float>>>& rows) {
    if (rows.empty() || rows.front().empty()) throw InvalidInputError("sample grid: no cells");
    const int cell_h = rows.front().front().dim(0);
    const int cell_w = rows.front().front().dim(1);
    const int cols = static_cast<int>(rows.front().size());
    const int sep = 2;
    const int grid_h = static_cast<int>(rows.size()) * (cell_h + sep) - sep;
    const int grid_w = cols * (cell_w + sep) - sep;
    Tensor<float> canvas({grid_h, grid_w}, 1.0f);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<int>(rows[r].size()) != cols)
            throw InvalidInputError("sample grid: ragged rows");
        for (int c = 0; c < cols; ++c) {
            const Tensor<float>& cell = rows[r][static_cast<std::size_t>(c)];
            if (cell.dim(0) != cell_h || cell.dim(1) != cell_w)
                throw InvalidInputError("sample grid: cell size mismatch");
            const int r0 = static_cast<int>(r) * (cell_h + sep);
            const int c0 = c * (cell_w + sep);
            for (int y = 0; y < cell_h; ++y)
                for (int x = 0; x < cell_w; ++x)
                    canvas.at(r0 + y, c0 + x) = std::clamp(cell.at(y, x), 0.0f, 1.0f);
        }
    }
    write_png_gray8(path, canvas);
}

// ROC polyline on a square canvas: white background, gray diagonal,
// black curve.
inline void render_roc_png(const std::string& path, const std::vector<int>& labels,
                           const std::vector<double>& scores, int size = 256) {
    if (labels.size() != scores.size() || labels.empty())
        throw InvalidInputError("roc png: labels/scores mismatch");
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) throw InvalidInputError("roc png: needs both classes");

    // ROC points from high threshold to low, grouping tied scores.
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? tp : fp) += 1;
            ++j;
        }
        pts.emplace_back(static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos);
        i = j;
    }

    Tensor<float> canvas({size, size}, 1.0f);
    auto put = [&](double fpr, double tpr, float v) {
        const int x = static_cast<int>(std::lround(fpr * (size - 1)));
        const int y = (size - 1) - static_cast<int>(std::lround(tpr * (size - 1)));
        canvas.at(std::clamp(y, 0, size - 1), std::clamp(x, 0, size - 1)) = v;
    };
    for (int k = 0; k < size; ++k)
        canvas.at(size - 1 - k, k) = 0.8f;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        const auto [x0, y0] = pts[k - 1];
        const auto [x1, y1] = pts[k];
        const int steps = 2 * size;
        for (int s = 0; s <= steps; ++s) {
            const double t = static_cast<double>(s) / steps;
            put(x0 + t * (x1 - x0), y0 + t * (y1 - y0), 0.0f);
        }
    }
    write_png_gray8(path, canvas);
}

} // namespace cigan
