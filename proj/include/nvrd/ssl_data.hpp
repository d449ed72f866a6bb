#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nvrd/errors.hpp"
#include "nvrd/image_io.hpp"
#include "nvrd/rng.hpp"
#include "nvrd/tensor.hpp"
#include "nvrd/video.hpp"

namespace nvrd::sim {

// Clips drawn for self-supervision, with the augmentation log needed to
// reproduce a batch exactly. sampled_with_replacement is set when the request
// exceeds the number of distinct windows the sources can provide.
struct SslClipBatch {
    std::vector<VideoClip> clips;
    std::vector<bool> hflipped;
    bool sampled_with_replacement = false;
};

// Draw n windows of clip_frames from the source videos: video choice and
// start frame are uniform (frame granularity, not scan granularity). When
// augment_hflip is set, each clip is independently mirrored with probability
// one half. Clips keep the origin tag of their source.
inline SslClipBatch sample_internal_clips(const std::vector<const VideoClip*>& videos,
                                          std::size_t n, std::size_t clip_frames,
                                          bool augment_hflip, std::uint64_t seed) {
    require_config(n >= 1, "sample_internal_clips: need at least one clip");
    require_config(clip_frames >= 1, "sample_internal_clips: empty window");
    require_shape(!videos.empty(), "sample_internal_clips: no source videos");
    std::size_t distinct = 0;
    for (const VideoClip* v : videos) {
        require_shape(v != nullptr, "sample_internal_clips: null video");
        require_shape(v->n_frames() >= clip_frames, "sample_internal_clips: video too short");
        distinct += v->n_frames() - clip_frames + 1;
    }
    Rng rng(mix_seed(seed, 0x73736c69u));
    SslClipBatch batch;
    batch.sampled_with_replacement = n > distinct;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t vi = rng.index(videos.size());
        const VideoClip& src = *videos[vi];
        std::size_t start = rng.index(src.n_frames() - clip_frames + 1);
        bool flip = augment_hflip && rng.uniform() < 0.5;
        VideoClip clip = slice_clip(src, start, clip_frames, src.origin_tag);
        if (flip) clip = hflip_clip(clip);
        batch.clips.push_back(std::move(clip));
        batch.hflipped.push_back(flip);
    }
    return batch;
}

// Smoothed random texture in [0.1, 0.9], the source imagery for synthesized
// camera pans.
inline Tensor make_texture(std::size_t height, std::size_t width, std::uint64_t seed) {
    require_config(height >= 4 && width >= 4, "make_texture: too small");
    Rng rng(mix_seed(seed, 0x74657874u));
    Tensor t = Tensor::zeros({height, width, 3});
    for (double& v : t.vec()) v = rng.uniform();
    // Two passes of a 5x5 box blur give broad blobs with sharp enough
    // autocorrelation for displacement checks.
    for (int pass = 0; pass < 2; ++pass) {
        Tensor s = t;
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x)
                for (std::size_t c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    double cnt = 0.0;
                    for (int dy = -2; dy <= 2; ++dy)
                        for (int dx = -2; dx <= 2; ++dx) {
                            long yy = static_cast<long>(y) + dy;
                            long xx = static_cast<long>(x) + dx;
                            if (yy < 0 || xx < 0 || yy >= static_cast<long>(height) ||
                                xx >= static_cast<long>(width))
                                continue;
                            acc += s.at(static_cast<std::size_t>(yy),
                                        static_cast<std::size_t>(xx), c);
                            cnt += 1.0;
                        }
                    t.at(y, x, c) = acc / cnt;
                }
    }
    double lo = 1.0, hi = 0.0;
    for (double v : t.vec()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double span = std::max(hi - lo, 1e-9);
    for (double& v : t.vec()) v = 0.1 + 0.8 * (v - lo) / span;
    return t;
}

// A synthesized camera pan: a window slides over a still image an integer
// number of pixels per frame, horizontally or vertically only.
struct PanSpec {
    std::size_t window_h = 32;
    std::size_t window_w = 32;
    std::size_t speed_px_per_frame = 1;
    std::size_t n_frames = 16;
    double frame_rate_hz = 8.0;
    std::vector<std::string> directions = {"right", "left", "up", "down"};
};

// One clip per requested direction, all cut from the same image. The right
// and down paths start at the top-left window; left and up retrace those
// same paths backwards, so "left" is bitwise the time reversal of "right"
// and "up" of "down". Requesting right and down together therefore yields
// identical first frames.
inline std::vector<VideoClip> synthesize_pan_clips(const Tensor& image, const PanSpec& spec) {
    require_shape(image.rank() == 3 && image.dim(2) == 3, "synthesize_pan_clips: image is (H,W,3)");
    require_config(spec.n_frames >= 2, "synthesize_pan_clips: need at least two frames");
    require_config(spec.speed_px_per_frame >= 1, "synthesize_pan_clips: zero speed");
    require_config(!spec.directions.empty(), "synthesize_pan_clips: no directions");
    std::size_t travel = spec.speed_px_per_frame * (spec.n_frames - 1);
    std::vector<VideoClip> out;
    for (const std::string& dir : spec.directions) {
        bool horizontal = dir == "right" || dir == "left";
        bool reversed = dir == "left" || dir == "up";
        require_config(horizontal || dir == "up" || dir == "down",
                       "synthesize_pan_clips: unknown direction " + dir);
        std::size_t need_h = spec.window_h + (horizontal ? 0 : travel);
        std::size_t need_w = spec.window_w + (horizontal ? travel : 0);
        require(image.dim(0) >= need_h && image.dim(1) >= need_w,
                "synthesize_pan_clips: pan path exits image bounds");

        VideoClip clip;
        clip.frame_rate_hz = spec.frame_rate_hz;
        clip.origin_tag = "synthetic";
        clip.frames = Tensor::zeros({spec.n_frames, spec.window_h, spec.window_w, 3});
        for (std::size_t f = 0; f < spec.n_frames; ++f) {
            std::size_t step = reversed ? spec.n_frames - 1 - f : f;
            std::size_t off = spec.speed_px_per_frame * step;
            std::size_t oy = horizontal ? 0 : off;
            std::size_t ox = horizontal ? off : 0;
            for (std::size_t y = 0; y < spec.window_h; ++y)
                for (std::size_t x = 0; x < spec.window_w; ++x)
                    for (std::size_t c = 0; c < 3; ++c)
                        clip.frames.at(f, y, x, c) = image.at(y + oy, x + ox, c);
        }
        out.push_back(std::move(clip));
    }
    return out;
}

struct PanClipBatch {
    std::vector<VideoClip> clips;
    std::vector<std::string> directions;
    double speed_px_per_frame = 1.0;
};

// Training stream of pans: groups of four directions, each group over a
// fresh procedural texture sized to fit the path.
inline PanClipBatch synthesize_pan_batch(std::size_t n, std::size_t height, std::size_t width,
                                         std::size_t clip_frames, double frame_rate_hz,
                                         std::uint64_t seed, std::size_t speed_px = 1) {
    require_config(n >= 1, "synthesize_pan_batch: need at least one clip");
    PanSpec spec;
    spec.window_h = height;
    spec.window_w = width;
    spec.speed_px_per_frame = speed_px;
    spec.n_frames = clip_frames;
    spec.frame_rate_hz = frame_rate_hz;
    std::size_t travel = speed_px * (clip_frames - 1);

    PanClipBatch batch;
    batch.speed_px_per_frame = static_cast<double>(speed_px);
    static const char* kDirections[4] = {"right", "left", "up", "down"};
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t group = i / 4;
        std::size_t dir = i % 4;
        bool horizontal = dir < 2;
        std::size_t th = height + (horizontal ? 0 : travel);
        std::size_t tw = width + (horizontal ? travel : 0);
        Tensor texture = make_texture(th, tw, mix_seed(seed, 0x70616eu, group));
        spec.directions = {kDirections[dir]};
        batch.clips.push_back(synthesize_pan_clips(texture, spec)[0]);
        batch.directions.push_back(kDirections[dir]);
    }
    return batch;
}

// Empirical per-frame displacement range of a video corpus, measured by the
// best integer shift aligning sampled consecutive frame pairs. Used to pick
// pan speeds that match the motion statistics of the training videos.
inline std::pair<std::size_t, std::size_t> measured_pan_speed_range(
    const std::vector<const VideoClip*>& videos, std::uint64_t seed, std::size_t n_samples = 8,
    std::size_t max_shift = 4) {
    require_shape(!videos.empty(), "measured_pan_speed_range: no videos");
    Rng rng(mix_seed(seed, 0x73706472u));
    std::size_t lo = max_shift, hi = 1;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const VideoClip& v = *videos[rng.index(videos.size())];
        require_shape(v.n_frames() >= 2, "measured_pan_speed_range: video too short");
        std::size_t t = rng.index(v.n_frames() - 1);
        std::size_t H = v.height(), W = v.width();
        const double* a = v.frames.data() + t * H * W * 3;
        const double* b = a + H * W * 3;
        double best_err = 1e300;
        std::size_t best_mag = 0;
        for (long dy = -static_cast<long>(max_shift); dy <= static_cast<long>(max_shift); ++dy)
            for (long dx = -static_cast<long>(max_shift); dx <= static_cast<long>(max_shift);
                 ++dx) {
                double err = 0.0, cnt = 0.0;
                for (std::size_t y = 0; y < H; ++y) {
                    long sy = static_cast<long>(y) + dy;
                    if (sy < 0 || sy >= static_cast<long>(H)) continue;
                    for (std::size_t x = 0; x < W; ++x) {
                        long sx = static_cast<long>(x) + dx;
                        if (sx < 0 || sx >= static_cast<long>(W)) continue;
                        for (std::size_t c = 0; c < 3; ++c) {
                            double d = b[(y * W + x) * 3 + c] -
                                       a[(static_cast<std::size_t>(sy) * W +
                                          static_cast<std::size_t>(sx)) *
                                             3 +
                                         c];
                            err += d * d;
                            cnt += 1.0;
                        }
                    }
                }
                err /= cnt;
                if (err < best_err) {
                    best_err = err;
                    best_mag = static_cast<std::size_t>(std::max(std::labs(dy), std::labs(dx)));
                }
            }
        lo = std::min(lo, std::max<std::size_t>(best_mag, 1));
        hi = std::max(hi, std::max<std::size_t>(best_mag, 1));
    }
    return {lo, hi};
}

// Composition of one unpaired batch: the internal share comes from recorded
// training videos, the rest from synthesized pans.
struct UnpairedBatchSpec {
    std::size_t batch_size = 10;
    double internal_fraction = 0.8;
    bool augment_hflip = true;
    std::uint64_t seed = 0;

    void validate() const {
        require_config(batch_size >= 1, "UnpairedBatchSpec: empty batch");
        require_config(internal_fraction >= 0.0 && internal_fraction <= 1.0,
                       "UnpairedBatchSpec: fraction must be in [0,1]");
    }
};

// Deterministic interleave of round(internal_fraction * batch) internal clips
// with synthetic ones. Callers must supply enough of each kind; a stream that
// contributes nothing may be empty.
inline std::vector<VideoClip> mix_batches(const std::vector<VideoClip>& internal,
                                          const std::vector<VideoClip>& synthetic,
                                          std::size_t batch, double internal_fraction,
                                          std::uint64_t seed) {
    require_config(batch >= 1, "mix_batches: empty batch");
    require_config(internal_fraction >= 0.0 && internal_fraction <= 1.0,
                   "mix_batches: fraction must be in [0,1]");
    std::size_t n_internal =
        static_cast<std::size_t>(std::llround(internal_fraction * static_cast<double>(batch)));
    std::size_t n_synth = batch - n_internal;
    require_shape(internal.size() >= n_internal, "mix_batches: not enough internal clips");
    require_shape(synthetic.size() >= n_synth, "mix_batches: not enough synthetic clips");
    std::vector<VideoClip> out;
    for (std::size_t i = 0; i < n_internal; ++i) out.push_back(internal[i]);
    for (std::size_t i = 0; i < n_synth; ++i) out.push_back(synthetic[i]);
    std::vector<std::size_t> order(out.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x6d6978u));
    rng.shuffle(order);
    std::vector<VideoClip> shuffled;
    shuffled.reserve(out.size());
    for (std::size_t i : order) shuffled.push_back(std::move(out[i]));
    return shuffled;
}

inline std::vector<VideoClip> mix_batches(const std::vector<VideoClip>& internal,
                                          const std::vector<VideoClip>& synthetic,
                                          const UnpairedBatchSpec& spec) {
    spec.validate();
    return mix_batches(internal, synthetic, spec.batch_size, spec.internal_fraction, spec.seed);
}

// Two adjacent 2-second windows of one video: v2 starts exactly one scan
// interval after v1 ends at the same length, so the ground-truth frame right
// after v1's window is v2's first frame. The pair feeds one high-frame-rate
// decode spanning both windows.
struct OverlapPair {
    VideoClip v1;
    VideoClip v2;
    std::size_t start_frame = 0;    // v1's first frame in the source video
    std::size_t offset_frames = 0;  // v2 start minus v1 start, one scan's worth
};

// Three consecutive windows: (v1,v2) and (v2,v3) form two overlapping
// decodes whose reconstructions must agree on the shared instant.
struct OverlapTriple {
    VideoClip v1;
    VideoClip v2;
    VideoClip v3;
    std::size_t start_frame = 0;
    std::size_t offset_frames = 0;
};

namespace detail {

inline std::size_t window_frames(const VideoClip& video, double window_seconds) {
    double f = window_seconds * video.frame_rate_hz;
    require_config(std::abs(f - std::llround(f)) < 1e-9,
                   "overlap windows need an integral frame count");
    return static_cast<std::size_t>(std::llround(f));
}

// Start offsets for n windows of span frames: distinct starts while the video
// has enough of them, uniform with replacement beyond that.
inline std::vector<std::size_t> window_starts(const VideoClip& video, std::size_t n,
                                              std::size_t span, Rng& rng) {
    require_shape(video.n_frames() >= span, "window_starts: video too short");
    std::size_t avail = video.n_frames() - span + 1;
    if (n <= avail) return rng.sample_without_replacement(avail, n);
    std::vector<std::size_t> starts(n);
    for (std::size_t i = 0; i < n; ++i) starts[i] = rng.index(avail);
    return starts;
}

}  // namespace detail

inline std::vector<OverlapPair> overlapping_clip_pairs(const VideoClip& video, std::size_t count,
                                                       std::uint64_t seed,
                                                       double window_seconds = 2.0) {
    require_config(count >= 1, "overlapping_clip_pairs: need at least one pair");
    std::size_t w = detail::window_frames(video, window_seconds);
    Rng rng(mix_seed(seed, 0x6f766c70u));
    std::vector<std::size_t> starts = detail::window_starts(video, count, 2 * w, rng);
    std::vector<OverlapPair> out;
    for (std::size_t start : starts) {
        OverlapPair pair;
        pair.v1 = slice_clip(video, start, w, video.origin_tag);
        pair.v2 = slice_clip(video, start + w, w, video.origin_tag);
        pair.start_frame = start;
        pair.offset_frames = w;
        // Construction audit: the frame after v1's window is v2's head.
        std::size_t frame_elems = video.height() * video.width() * 3;
        const double* boundary = video.frames.data() + (start + w) * frame_elems;
        const double* head = pair.v2.frames.data();
        for (std::size_t i = 0; i < frame_elems; ++i)
            require_shape(boundary[i] == head[i], "overlapping_clip_pairs: boundary mismatch");
        out.push_back(std::move(pair));
    }
    return out;
}

inline std::vector<OverlapTriple> overlapping_clip_triples(const VideoClip& video,
                                                           std::size_t count, std::uint64_t seed,
                                                           double window_seconds = 2.0) {
    require_config(count >= 1, "overlapping_clip_triples: need at least one triple");
    std::size_t w = detail::window_frames(video, window_seconds);
    Rng rng(mix_seed(seed, 0x6f76337au));
    std::vector<std::size_t> starts = detail::window_starts(video, count, 3 * w, rng);
    std::vector<OverlapTriple> out;
    for (std::size_t start : starts) {
        OverlapTriple triple;
        triple.v1 = slice_clip(video, start, w, video.origin_tag);
        triple.v2 = slice_clip(video, start + w, w, video.origin_tag);
        triple.v3 = slice_clip(video, start + 2 * w, w, video.origin_tag);
        triple.start_frame = start;
        triple.offset_frames = w;
        out.push_back(std::move(triple));
    }
    return out;
}

// Load an image sequence (PNG or PPM frames, identical sizes) as a clip.
inline VideoClip load_image_clip(const std::vector<std::filesystem::path>& frame_files,
                                 double frame_rate_hz) {
    require_io(!frame_files.empty(), "load_image_clip: no frames");
    VideoClip clip;
    clip.frame_rate_hz = frame_rate_hz;
    clip.origin_tag = "external";
    for (std::size_t i = 0; i < frame_files.size(); ++i) {
        Tensor img = read_image(frame_files[i]);
        if (i == 0) {
            clip.frames = Tensor::zeros({frame_files.size(), img.dim(0), img.dim(1), 3});
        } else {
            require_shape(img.dim(0) == clip.frames.dim(1) && img.dim(1) == clip.frames.dim(2),
                          "load_image_clip: frame size mismatch");
        }
        std::copy_n(img.data(), img.numel(), clip.frames.data() + i * img.numel());
    }
    clip.validate();
    return clip;
}

}  // namespace nvrd::sim
