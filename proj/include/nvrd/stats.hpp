#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "nvrd/errors.hpp"

namespace nvrd {

// Pearson correlation; returns nothing when either input is (numerically)
// constant, since the coefficient is undefined there.
inline std::optional<double> try_pearson(const std::vector<double>& x,
                                         const std::vector<double>& y) {
    require_shape(x.size() == y.size(), "pearson: length mismatch");
    require_shape(x.size() >= 2, "pearson: need at least two samples");
    double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx < 1e-24 || syy < 1e-24) return std::nullopt;
    double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    auto r = try_pearson(x, y);
    if (!r) throw degenerate_input_error("pearson: constant input");
    return *r;
}

// Ranks with ties assigned the mean of the positions they occupy (1-based).
inline std::vector<double> midranks(const std::vector<double>& x) {
    std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// Spearman rank correlation: Pearson on midranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(midranks(x), midranks(y));
}

inline double mean_of(const std::vector<double>& x) {
    require_shape(!x.empty(), "mean: empty input");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Unbiased sample variance (ddof = 1).
inline double sample_variance(const std::vector<double>& x) {
    require_shape(x.size() >= 2, "variance: need at least two samples");
    double m = mean_of(x);
    double acc = 0.0;
    for (double v : x) acc += (v - m) * (v - m);
    return acc / static_cast<double>(x.size() - 1);
}

}  // namespace nvrd
