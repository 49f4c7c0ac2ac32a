#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/eval/auc.hpp"

namespace cigan {

// Fast DeLong structural components for one score list: V10 per positive,
// V01 per negative, computed from midranks (ties handled as midranks).
struct DeLongComponents {
    double auc = 0.0;
    std::vector<double> v10;
    std::vector<double> v01;
};

namespace detail {

inline DeLongComponents delong_components(std::span<const double> scores,
                                          std::span<const int> labels) {
    std::vector<double> pos, neg;
    split_by_label(scores, labels, pos, neg);
    const std::size_t m = pos.size(), n = neg.size();
    std::vector<double> combined;
    combined.reserve(m + n);
    combined.insert(combined.end(), pos.begin(), pos.end());
    combined.insert(combined.end(), neg.begin(), neg.end());
    const std::vector<double> tz = midranks(combined);
    const std::vector<double> tx = midranks(pos);
    const std::vector<double> ty = midranks(neg);

    DeLongComponents out;
    out.v10.resize(m);
    out.v01.resize(n);
    double pos_rank_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        out.v10[i] = (tz[i] - tx[i]) / static_cast<double>(n);
        pos_rank_sum += tz[i];
    }
    for (std::size_t j = 0; j < n; ++j)
        out.v01[j] = 1.0 - (tz[m + j] - ty[j]) / static_cast<double>(m);
    out.auc = (pos_rank_sum - 0.5 * static_cast<double>(m) * static_cast<double>(m + 1)) /
              (static_cast<double>(m) * static_cast<double>(n));
    return out;
}

inline double sample_cov(const std::vector<double>& a, const std::vector<double>& b,
                         double mean_a, double mean_b) {
    const std::size_t n = a.size();
    if (n < 2) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += (a[i] - mean_a) * (b[i] - mean_b);
    return acc / static_cast<double>(n - 1);
}

} // namespace detail

// Variance estimate of a single AUC (DeLong).
inline double delong_variance(std::span<const double> scores, std::span<const int> labels) {
    const DeLongComponents c = detail::delong_components(scores, labels);
    const double s10 = detail::sample_cov(c.v10, c.v10, c.auc, c.auc);
    const double s01 = detail::sample_cov(c.v01, c.v01, c.auc, c.auc);
    return s10 / static_cast<double>(c.v10.size()) + s01 / static_cast<double>(c.v01.size());
}

struct DeLongResult {
    double auc_a = 0.0;
    double auc_b = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    double covariance = 0.0;
    double z = 0.0;
    double p_value = 1.0;
};

// Paired DeLong comparison of two score lists over the same labels; the
// two-sided p-value uses the standard normal approximation.
inline DeLongResult delong_test(std::span<const double> scores_a,
                                std::span<const double> scores_b,
                                std::span<const int> labels) {
    if (scores_a.size() != labels.size() || scores_b.size() != labels.size())
        throw InvalidInputError("delong_test: score lists must align with labels");
    if (labels.size() < 4)
        throw InvalidInputError("delong_test: need at least 4 observations");
    const DeLongComponents ca = detail::delong_components(scores_a, labels);
    const DeLongComponents cb = detail::delong_components(scores_b, labels);
    const auto m = static_cast<double>(ca.v10.size());
    const auto n = static_cast<double>(ca.v01.size());

    DeLongResult r;
    r.auc_a = ca.auc;
    r.auc_b = cb.auc;
    const double s10_aa = detail::sample_cov(ca.v10, ca.v10, ca.auc, ca.auc);
    const double s10_bb = detail::sample_cov(cb.v10, cb.v10, cb.auc, cb.auc);
    const double s10_ab = detail::sample_cov(ca.v10, cb.v10, ca.auc, cb.auc);
    const double s01_aa = detail::sample_cov(ca.v01, ca.v01, ca.auc, ca.auc);
    const double s01_bb = detail::sample_cov(cb.v01, cb.v01, cb.auc, cb.auc);
    const double s01_ab = detail::sample_cov(ca.v01, cb.v01, ca.auc, cb.auc);
    r.var_a = s10_aa / m + s01_aa / n;
    r.var_b = s10_bb / m + s01_bb / n;
    r.covariance = s10_ab / m + s01_ab / n;

    const double var_diff = r.var_a + r.var_b - 2.0 * r.covariance;
    const double auc_diff = r.auc_a - r.auc_b;
    constexpr double kTiny = 1e-15;
    if (var_diff <= kTiny) {
        if (std::abs(auc_diff) <= kTiny) {
            r.z = 0.0;
            r.p_value = 1.0;
            return r;
        }
        throw NumericError("delong_test: degenerate statistics (zero variance, unequal AUCs)");
    }
    r.z = auc_diff / std::sqrt(var_diff);
    r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
    return r;
}

} // namespace cigan
