#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "nvrd/errors.hpp"
#include "nvrd/hrf.hpp"
#include "nvrd/rng.hpp"
#include "nvrd/tensor.hpp"
#include "nvrd/video.hpp"

namespace nvrd::sim {

// Hand-coded stimulus features on a 4x4 spatial grid, three blocks of 16:
//   [0,16)  mean luminance per cell (linear in pixel values)
//   [16,32) edge energy per cell (mean |gx| + |gy| of central differences)
//   [32,48) motion energy per cell (mean |luma(t) - luma(t-1)|, zero on the
//           first frame of a clip)
inline constexpr std::size_t kFeatureGrid = 4;
inline constexpr std::size_t kFeatureDim = 3 * kFeatureGrid * kFeatureGrid;

namespace detail {

inline void frame_luma(const Tensor& frames, std::size_t t, std::vector<double>& luma) {
    std::size_t H = frames.dim(1), W = frames.dim(2);
    luma.resize(H * W);
    const double* p = frames.data() + t * H * W * 3;
    for (std::size_t i = 0; i < H * W; ++i)
        luma[i] = (0.299 * p[3 * i] + 0.587 * p[3 * i + 1] + 0.114 * p[3 * i + 2]);
}

struct CellGrid {
    std::size_t H, W;
    std::size_t cell_of(std::size_t y, std::size_t x) const {
        std::size_t gy = y * kFeatureGrid / H;
        std::size_t gx = x * kFeatureGrid / W;
        return gy * kFeatureGrid + gx;
    }
};

}  // namespace detail

// Features for frame t of a clip; prev_luma is empty for the first frame.
inline void frame_stimulus_features(const Tensor& frames, std::size_t t,
                                    const std::vector<double>& prev_luma,
                                    const std::vector<double>& luma, double* out) {
    std::size_t H = frames.dim(1), W = frames.dim(2);
    detail::CellGrid grid{H, W};
    std::vector<double> cell_sum(3 * kFeatureGrid * kFeatureGrid, 0.0);
    std::vector<double> cell_n(kFeatureGrid * kFeatureGrid, 0.0);
    std::vector<double> edge_n(kFeatureGrid * kFeatureGrid, 0.0);
    constexpr std::size_t n_cells = kFeatureGrid * kFeatureGrid;
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            std::size_t c = grid.cell_of(y, x);
            double l = luma[y * W + x];
            cell_sum[c] += l;
            cell_n[c] += 1.0;
            if (y > 0 && y + 1 < H && x > 0 && x + 1 < W) {
                double gx = 0.5 * (luma[y * W + x + 1] - luma[y * W + x - 1]);
                double gy = 0.5 * (luma[(y + 1) * W + x] - luma[(y - 1) * W + x]);
                cell_sum[n_cells + c] += std::fabs(gx) + std::fabs(gy);
                edge_n[c] += 1.0;
            }
            if (!prev_luma.empty())
                cell_sum[2 * n_cells + c] += std::fabs(l - prev_luma[y * W + x]);
        }
    }
    for (std::size_t c = 0; c < n_cells; ++c) {
        out[c] = cell_sum[c] / cell_n[c];
        out[n_cells + c] = edge_n[c] > 0.0 ? cell_sum[n_cells + c] / edge_n[c] : 0.0;
        out[2 * n_cells + c] = prev_luma.empty() ? 0.0 : cell_sum[2 * n_cells + c] / cell_n[c];
    }
    (void)t;
}

// Per-frame features for a whole clip, shape (T, kFeatureDim).
inline Tensor stimulus_features(const VideoClip& clip) {
    clip.validate();
    std::size_t T = clip.n_frames();
    Tensor out = Tensor::zeros({T, kFeatureDim});
    std::vector<double> prev, cur;
    for (std::size_t t = 0; t < T; ++t) {
        detail::frame_luma(clip.frames, t, cur);
        frame_stimulus_features(clip.frames, t, t == 0 ? std::vector<double>{} : prev, cur,
                                out.data() + t * kFeatureDim);
        std::swap(prev, cur);
    }
    return out;
}

// Average per-frame features over each TR window; shape (n_trs, kFeatureDim).
// Frames past the last full TR are dropped.
inline Tensor tr_stimulus_features(const VideoClip& clip, double tr_seconds) {
    require_config(tr_seconds > 0.0, "tr features: tr must be positive");
    double fpt = tr_seconds * clip.frame_rate_hz;
    std::size_t frames_per_tr = static_cast<std::size_t>(std::llround(fpt));
    require_config(frames_per_tr >= 1 && std::fabs(fpt - static_cast<double>(frames_per_tr)) < 1e-9,
            "tr features: TR must be an integer number of frames");
    Tensor per_frame = stimulus_features(clip);
    std::size_t n_trs = clip.n_frames() / frames_per_tr;
    require_shape(n_trs >= 1, "tr features: clip shorter than one TR");
    Tensor out = Tensor::zeros({n_trs, kFeatureDim});
    for (std::size_t t = 0; t < n_trs; ++t) {
        for (std::size_t f = 0; f < frames_per_tr; ++f) {
            const double* src = per_frame.data() + (t * frames_per_tr + f) * kFeatureDim;
            for (std::size_t j = 0; j < kFeatureDim; ++j) out.at(t, j) += src[j];
        }
        for (std::size_t j = 0; j < kFeatureDim; ++j)
            out.at(t, j) /= static_cast<double>(frames_per_tr);
    }
    return out;
}

// A simulated observer: a fixed linear readout of the stimulus features,
// smoothed by the hemodynamic kernel, shifted by an acquisition delay, plus
// white measurement noise.
struct VirtualSubject {
    Tensor readout_weights;  // (V, kFeatureDim)
    HrfKernel hrf;
    std::size_t delay_trs = 2;
    double noise_sigma = 0.6;
    std::uint64_t seed = 0;

    std::size_t n_voxels() const { return readout_weights.shape().empty() ? 0 : readout_weights.dim(0); }

    void validate() const {
        require(readout_weights.rank() == 2 && readout_weights.dim(1) == kFeatureDim,
                "subject: readout must be (V, feature_dim)");
        require(readout_weights.dim(0) >= 1, "subject: no voxels");
        require(noise_sigma >= 0.0, "subject: negative noise sigma");
        hrf.validate();
    }
};

// One acquisition: samples are (T, V), noise_seed records the exact stream
// that generated the measurement noise so repeats are reproducible.
struct FmriSeries {
    Tensor samples;
    double tr_seconds = 2.0;
    std::size_t repeat_index = 0;
    std::uint64_t noise_seed = 0;
};

// Readout rows are unit-norm isotropic directions over standardized features.
// The per-feature scales are baked in at construction from a calibration clip
// so raw feature blocks with very different magnitudes (luminance ~0.5, motion
// ~0.01) contribute comparably.
inline VirtualSubject make_virtual_subject(std::size_t n_voxels, std::uint64_t seed,
                                           double noise_sigma = 0.6, std::size_t delay_trs = 2,
                                           double tr_seconds = 2.0) {
    require_config(n_voxels >= 1, "make_virtual_subject: need at least one voxel");
    VirtualSubject s;
    s.seed = seed;
    s.noise_sigma = noise_sigma;
    s.delay_trs = delay_trs;
    s.hrf = canonical_hrf(tr_seconds);

    SceneSpec cal_spec;
    VideoClip cal = generate_video(cal_spec, 120.0, mix_seed(seed, 0x63616cu));
    Tensor feats = tr_stimulus_features(cal, tr_seconds);
    std::vector<double> scale(kFeatureDim, 1.0);
    std::size_t T = feats.dim(0);
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
        double m = 0.0, v = 0.0;
        for (std::size_t t = 0; t < T; ++t) m += feats.at(t, j);
        m /= static_cast<double>(T);
        for (std::size_t t = 0; t < T; ++t) {
            double d = feats.at(t, j) - m;
            v += d * d;
        }
        scale[j] = std::max(std::sqrt(v / static_cast<double>(T)), 1e-6);
    }

    Rng rng(mix_seed(seed, 0x726f7574u));
    s.readout_weights = Tensor::zeros({n_voxels, kFeatureDim});
    for (std::size_t v = 0; v < n_voxels; ++v) {
        double norm2 = 0.0;
        std::vector<double> row(kFeatureDim);
        for (std::size_t j = 0; j < kFeatureDim; ++j) {
            row[j] = rng.normal();
            norm2 += row[j] * row[j];
        }
        double inv = 1.0 / std::sqrt(std::max(norm2, 1e-12));
        for (std::size_t j = 0; j < kFeatureDim; ++j)
            s.readout_weights.at(v, j) = row[j] * inv / scale[j];
    }
    s.validate();
    return s;
}

// Noiseless response: per-TR features -> linear readout -> causal smoothing
// by the kernel -> right shift by delay_trs (zeros fill the head).
inline Tensor simulate_noiseless(const VirtualSubject& subject, const VideoClip& video,
                                 double tr_seconds = 2.0) {
    subject.validate();
    Tensor feats = tr_stimulus_features(video, tr_seconds);
    std::size_t T = feats.dim(0);
    std::size_t V = subject.n_voxels();
    std::vector<double> drive(T * V, 0.0);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t v = 0; v < V; ++v) {
            double acc = 0.0;
            for (std::size_t j = 0; j < kFeatureDim; ++j)
                acc += subject.readout_weights.at(v, j) * feats.at(t, j);
            drive[t * V + v] = acc;
        }
    std::vector<double> smoothed = causal_convolve(drive, T, V, subject.hrf.taps);
    Tensor out = Tensor::zeros({T, V});
    for (std::size_t t = subject.delay_trs; t < T; ++t)
        for (std::size_t v = 0; v < V; ++v)
            out.at(t, v) = smoothed[(t - subject.delay_trs) * V + v];
    return out;
}

namespace detail {

inline FmriSeries add_measurement_noise(const VirtualSubject& subject, const Tensor& noiseless,
                                        double tr_seconds, std::size_t repeat_index,
                                        std::uint64_t noise_salt) {
    FmriSeries series;
    series.samples = noiseless;
    series.tr_seconds = tr_seconds;
    series.repeat_index = repeat_index;
    series.noise_seed = mix_seed(mix_seed(subject.seed, noise_salt + 0x6e6f6973u),
                                 static_cast<std::uint64_t>(repeat_index));
    Rng rng(series.noise_seed);
    for (double& x : series.samples.vec()) x += subject.noise_sigma * rng.normal();
    return series;
}

}  // namespace detail

// One noisy acquisition. The noise stream is derived from the subject seed,
// a caller-provided salt (e.g. segment id), and the repeat index, so every
// (segment, repeat) pair sees independent noise while staying reproducible.
inline FmriSeries simulate_fmri(const VirtualSubject& subject, const VideoClip& video,
                                std::size_t repeat_index = 0, std::uint64_t noise_salt = 0,
                                double tr_seconds = 2.0) {
    return detail::add_measurement_noise(subject, simulate_noiseless(subject, video, tr_seconds),
                                         tr_seconds, repeat_index, noise_salt);
}

// k acquisitions of the same stimulus with independent noise streams. The
// noiseless response is computed once and shared.
inline std::vector<FmriSeries> simulate_repeats(const VirtualSubject& subject,
                                                const VideoClip& video, std::size_t n_repeats,
                                                std::uint64_t noise_salt = 0,
                                                double tr_seconds = 2.0) {
    require(n_repeats >= 1, "simulate_repeats: need at least one repeat");
    Tensor noiseless = simulate_noiseless(subject, video, tr_seconds);
    std::vector<FmriSeries> out;
    out.reserve(n_repeats);
    for (std::size_t r = 0; r < n_repeats; ++r)
        out.push_back(detail::add_measurement_noise(subject, noiseless, tr_seconds, r, noise_salt));
    return out;
}

}  // namespace nvrd::sim
