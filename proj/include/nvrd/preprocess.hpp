#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nvrd/errors.hpp"
#include "nvrd/hrf.hpp"
#include "nvrd/stats.hpp"
#include "nvrd/tensor.hpp"

namespace nvrd {

// Result of scanning candidate lags between a measured series and the
// stimulus features. Shifts whose overlap was too short to correlate are
// listed in skipped_shifts and excluded from the scan.
struct AlignmentResult {
    int best_shift = 0;
    std::vector<int> shifts;
    std::vector<double> scores;  // median over voxels of per-voxel best |r|
    std::vector<int> skipped_shifts;
};

// Scan integer lags between fmri (T,V) and stimulus features (T,F). The
// feature series is smoothed by the hemodynamic kernel first, so the winning
// lag estimates the residual acquisition delay rather than the kernel peak.
// For each lag the score is the median over voxels of the best absolute
// correlation across features; ties resolve to the smallest lag. Lags with
// fewer than four overlapping samples are skipped; if every lag is skipped
// the series is too short to align.
inline AlignmentResult find_temporal_alignment(const Tensor& fmri, const Tensor& features,
                                               const sim::HrfKernel& hrf, int min_shift = -1,
                                               int max_shift = 5) {
    require_shape(fmri.rank() == 2, "alignment: fmri must be (T,V)");
    require_shape(features.rank() == 2, "alignment: features must be (T,F)");
    require_shape(fmri.dim(0) == features.dim(0), "alignment: length mismatch");
    require_config(min_shift <= max_shift, "alignment: empty shift range");
    hrf.validate();

    std::size_t T = fmri.dim(0), V = fmri.dim(1), F = features.dim(1);
    std::vector<double> feat_flat(features.vec());
    std::vector<double> smoothed = sim::causal_convolve(feat_flat, T, F, hrf.taps);

    AlignmentResult res;
    double best_score = -1.0;
    bool any = false;
    std::vector<double> xs, ys;
    for (int s = min_shift; s <= max_shift; ++s) {
        std::size_t lo_f = static_cast<std::size_t>(std::max(0, s));
        std::size_t hi_f = T - static_cast<std::size_t>(std::max(0, -s));
        if (hi_f <= lo_f || hi_f - lo_f < 4) {
            res.skipped_shifts.push_back(s);
            continue;
        }
        std::size_t n = hi_f - lo_f;
        std::vector<double> per_voxel;
        per_voxel.reserve(V);
        for (std::size_t v = 0; v < V; ++v) {
            xs.resize(n);
            for (std::size_t t = 0; t < n; ++t) xs[t] = fmri.at(lo_f + t, v);
            double best_abs = -1.0;
            for (std::size_t f = 0; f < F; ++f) {
                ys.resize(n);
                // With a lag of s, measurement sample t pairs with smoothed
                // feature sample t - s.
                for (std::size_t t = 0; t < n; ++t) {
                    std::size_t src = lo_f + t - static_cast<std::size_t>(s > 0 ? s : 0) +
                                      static_cast<std::size_t>(s < 0 ? -s : 0);
                    ys[t] = smoothed[src * F + f];
                }
                auto r = try_pearson(xs, ys);
                if (r) best_abs = std::max(best_abs, std::fabs(*r));
            }
            if (best_abs >= 0.0) per_voxel.push_back(best_abs);
        }
        double score = 0.0;
        if (!per_voxel.empty()) {
            std::sort(per_voxel.begin(), per_voxel.end());
            std::size_t m = per_voxel.size();
            score = m % 2 ? per_voxel[m / 2] : 0.5 * (per_voxel[m / 2 - 1] + per_voxel[m / 2]);
        }
        res.shifts.push_back(s);
        res.scores.push_back(score);
        if (!any || score > best_score) {
            any = true;
            best_score = score;
            res.best_shift = s;
        }
    }
    if (!any) throw degenerate_input_error("alignment: no lag had enough overlap");
    return res;
}

// Per-voxel mean pairwise correlation across repeated acquisitions of the
// same stimulus. Voxels that are constant in some repeat score zero.
inline std::vector<double> reproducibility_scores(const std::vector<Tensor>& repeats) {
    require_shape(repeats.size() >= 2, "reproducibility: need at least two repeats");
    std::size_t T = repeats[0].dim(0), V = repeats[0].dim(1);
    for (const Tensor& r : repeats)
        require_shape(r.rank() == 2 && r.dim(0) == T && r.dim(1) == V,
                      "reproducibility: repeat shape mismatch");
    std::vector<double> out(V, 0.0);
    std::vector<double> a(T), b(T);
    for (std::size_t v = 0; v < V; ++v) {
        double acc = 0.0;
        std::size_t n_pairs = 0;
        bool degenerate = false;
        for (std::size_t i = 0; i < repeats.size() && !degenerate; ++i) {
            for (std::size_t j = i + 1; j < repeats.size() && !degenerate; ++j) {
                for (std::size_t t = 0; t < T; ++t) {
                    a[t] = repeats[i].at(t, v);
                    b[t] = repeats[j].at(t, v);
                }
                auto r = try_pearson(a, b);
                if (!r) {
                    degenerate = true;
                    break;
                }
                acc += *r;
                ++n_pairs;
            }
        }
        out[v] = degenerate ? 0.0 : acc / static_cast<double>(n_pairs);
    }
    return out;
}

// Per-voxel signal-to-noise: variance over time of the across-repeat mean,
// divided by the time-average of the across-repeat variance (ddof = 1).
// Noise-free voxels are capped at 1e6 instead of dividing by zero.
inline std::vector<double> voxel_snr(const std::vector<Tensor>& repeats) {
    require_shape(repeats.size() >= 2, "voxel_snr: need at least two repeats");
    std::size_t T = repeats[0].dim(0), V = repeats[0].dim(1);
    require_shape(T >= 2, "voxel_snr: need at least two samples");
    for (const Tensor& r : repeats)
        require_shape(r.rank() == 2 && r.dim(0) == T && r.dim(1) == V,
                      "voxel_snr: repeat shape mismatch");
    std::size_t k = repeats.size();
    std::vector<double> out(V, 0.0);
    std::vector<double> mean_t(T);
    std::vector<double> xs(k);
    for (std::size_t v = 0; v < V; ++v) {
        double noise_acc = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t r = 0; r < k; ++r) xs[r] = repeats[r].at(t, v);
            mean_t[t] = mean_of(xs);
            noise_acc += sample_variance(xs);
        }
        double noise = noise_acc / static_cast<double>(T);
        double signal = sample_variance(mean_t);
        out[v] = noise < 1e-12 ? 1e6 : signal / noise;
    }
    return out;
}

// Split-half reliability with Spearman-Brown correction, clipped to [0,1]:
// repeats are split even/odd, each half is averaged, the halves are
// correlated per voxel over time, and r' = 2r / (1 + r) extrapolates to the
// full repeat count. Degenerate voxels score zero.
inline std::vector<double> noise_ceiling(const std::vector<Tensor>& repeats) {
    require_shape(repeats.size() >= 2, "noise_ceiling: need at least two repeats");
    std::size_t T = repeats[0].dim(0), V = repeats[0].dim(1);
    for (const Tensor& r : repeats)
        require_shape(r.rank() == 2 && r.dim(0) == T && r.dim(1) == V,
                      "noise_ceiling: repeat shape mismatch");
    std::vector<double> out(V, 0.0);
    std::vector<double> ha(T), hb(T);
    for (std::size_t v = 0; v < V; ++v) {
        std::size_t na = 0, nb = 0;
        std::fill(ha.begin(), ha.end(), 0.0);
        std::fill(hb.begin(), hb.end(), 0.0);
        for (std::size_t r = 0; r < repeats.size(); ++r) {
            bool even = r % 2 == 0;
            for (std::size_t t = 0; t < T; ++t)
                (even ? ha[t] : hb[t]) += repeats[r].at(t, v);
            (even ? na : nb) += 1;
        }
        for (std::size_t t = 0; t < T; ++t) {
            ha[t] /= static_cast<double>(na);
            hb[t] /= static_cast<double>(nb);
        }
        auto r = try_pearson(ha, hb);
        if (!r) continue;
        double corrected = 2.0 * *r / (1.0 + *r);
        out[v] = std::clamp(corrected, 0.0, 1.0);
    }
    return out;
}

// The subset of voxels carried into modeling, with the scores that chose it.
struct VoxelSelection {
    std::vector<std::size_t> indices;  // ascending
    std::vector<double> scores;        // score per selected voxel, same order
    std::size_t n_total = 0;
    std::string criterion = "snr";
};

// Keep the k best-scoring voxels; indices come back ascending so downstream
// gathers preserve time-major layout.
inline VoxelSelection select_voxels(const std::vector<double>& scores, std::size_t k,
                                    const std::string& criterion = "snr") {
    require_config(k >= 1, "select_voxels: k must be positive");
    require_shape(k <= scores.size(), "select_voxels: k exceeds voxel count");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    VoxelSelection sel;
    sel.n_total = scores.size();
    sel.criterion = criterion;
    sel.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(sel.indices.begin(), sel.indices.end());
    sel.scores.reserve(k);
    for (std::size_t i : sel.indices) sel.scores.push_back(scores[i]);
    return sel;
}

inline void to_json(nlohmann::json& j, const VoxelSelection& s) {
    j = nlohmann::json{{"indices", s.indices},
                       {"scores", s.scores},
                       {"n_total", s.n_total},
                       {"criterion", s.criterion}};
}

inline void from_json(const nlohmann::json& j, VoxelSelection& s) {
    j.at("indices").get_to(s.indices);
    j.at("scores").get_to(s.scores);
    j.at("n_total").get_to(s.n_total);
    s.criterion = j.value("criterion", "snr");
}

// Gather the selected columns of a (T,V) series into (T,k).
inline Tensor apply_voxel_selection(const Tensor& series, const VoxelSelection& sel) {
    require_shape(series.rank() == 2, "apply_voxel_selection: series must be (T,V)");
    require_shape(sel.n_total == series.dim(1), "apply_voxel_selection: voxel count mismatch");
    std::size_t T = series.dim(0), k = sel.indices.size();
    Tensor out = Tensor::zeros({T, k});
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < k; ++i) {
            require_shape(sel.indices[i] < series.dim(1), "apply_voxel_selection: index range");
            out.at(t, i) = series.at(t, sel.indices[i]);
        }
    return out;
}

}  // namespace nvrd
