#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nvrd/errors.hpp"
#include "nvrd/rng.hpp"
#include "nvrd/tensor.hpp"

namespace nvrd::sim {

// A clip of frames (T,H,W,3) with values in [0,1]. origin_tag records where
// the pixels came from: "internal" (cut from benchmark stimuli), "synthetic"
// (procedurally generated), or "external" (ingested image sequences).
struct VideoClip {
    Tensor frames;
    double frame_rate_hz = 8.0;
    std::string origin_tag = "synthetic";

    std::size_t n_frames() const { return frames.shape().empty() ? 0 : frames.dim(0); }
    std::size_t height() const { return frames.rank() > 1 ? frames.dim(1) : 0; }
    std::size_t width() const { return frames.rank() > 2 ? frames.dim(2) : 0; }
    double duration_seconds() const { return static_cast<double>(n_frames()) / frame_rate_hz; }

    void validate() const {
        require(frames.rank() == 4, "video: frames must be (T,H,W,C)");
        require(frames.dim(3) == 3, "video: expected 3 channels");
        require(frames.dim(0) >= 1, "video: empty clip");
        require(frame_rate_hz > 0.0, "video: frame rate must be positive");
        require(origin_tag == "internal" || origin_tag == "synthetic" || origin_tag == "external",
                "video: unknown origin tag");
    }
};

// Parameters of the procedural scene: drifting sinusoidal gratings in the
// background, soft-edged moving disks in front, and a slow global luminance
// envelope. Speeds are in pixels per frame; setting both speeds to zero
// freezes all temporal evolution so every frame is identical.
struct SceneSpec {
    std::size_t height = 32;
    std::size_t width = 32;
    double frame_rate_hz = 8.0;
    std::size_t sprite_count = 3;
    double sprite_speed = 1.2;
    double background_speed = 0.35;
    double luminance_amplitude = 0.15;
};

namespace detail {

struct Grating {
    double kx, ky;        // spatial frequency vector, radians per pixel
    double phase0;
    double drift_rate;    // radians per frame at unit background speed
    double wobble_amp;    // radians
    double wobble_period; // frames
    double wobble_phase;
    double weight[3];     // per channel contribution
};

struct Sprite {
    double x0, y0;
    double radius;
    double color[3];
    double speed_scale;    // relative to spec.sprite_speed
    double heading0;       // radians
    double turn_period;    // frames per full heading revolution
    double pulse_period;   // frames for the speed modulation
    double pulse_phase;
};

// Fold a coordinate into [0, 2*limit) mirror space and reflect, so sprites
// bounce off the borders instead of wrapping.
inline double reflect(double p, double limit) {
    double m = 2.0 * limit;
    p = std::fmod(p, m);
    if (p < 0.0) p += m;
    return p < limit ? p : m - p;
}

}  // namespace detail

// Deterministic per seed: all randomness is drawn up front, every frame is a
// pure function of its time index.
inline VideoClip generate_video(const SceneSpec& spec, double duration_seconds,
                                std::uint64_t seed) {
    require_config(spec.height >= 8 && spec.width >= 8, "generate_video: scene too small");
    require_config(spec.frame_rate_hz > 0.0, "generate_video: frame rate must be positive");
    require_config(duration_seconds > 0.0, "generate_video: duration must be positive");
    std::size_t T = static_cast<std::size_t>(std::llround(duration_seconds * spec.frame_rate_hz));
    require(T >= 1, "generate_video: zero frames");

    Rng rng(mix_seed(seed, 0x76696465u));
    double fps = spec.frame_rate_hz;
    bool frozen = spec.sprite_speed == 0.0 && spec.background_speed == 0.0;

    std::vector<detail::Grating> gratings(2);
    for (auto& g : gratings) {
        double theta = rng.uniform(0.0, 2.0 * M_PI);
        double freq = rng.uniform(0.25, 0.75);  // radians per pixel
        g.kx = freq * std::cos(theta);
        g.ky = freq * std::sin(theta);
        g.phase0 = rng.uniform(0.0, 2.0 * M_PI);
        g.drift_rate = freq * rng.uniform(0.6, 1.4) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        g.wobble_amp = rng.uniform(0.8, 2.2);
        g.wobble_period = rng.uniform(16.0, 40.0) * fps;
        g.wobble_phase = rng.uniform(0.0, 2.0 * M_PI);
        for (double& w : g.weight) w = rng.uniform(0.04, 0.12);
    }

    std::vector<detail::Sprite> sprites(spec.sprite_count);
    for (auto& s : sprites) {
        s.x0 = rng.uniform(0.0, static_cast<double>(spec.width));
        s.y0 = rng.uniform(0.0, static_cast<double>(spec.height));
        s.radius = rng.uniform(3.5, 6.5);
        for (double& c : s.color) c = rng.uniform(0.15, 0.95);
        s.speed_scale = rng.uniform(0.6, 1.4);
        s.heading0 = rng.uniform(0.0, 2.0 * M_PI);
        s.turn_period = rng.uniform(12.0, 36.0) * fps;
        s.pulse_period = rng.uniform(10.0, 24.0) * fps;
        s.pulse_phase = rng.uniform(0.0, 2.0 * M_PI);
    }
    double lum_period = rng.uniform(18.0, 30.0) * fps;
    double lum_phase = rng.uniform(0.0, 2.0 * M_PI);

    VideoClip clip;
    clip.frame_rate_hz = fps;
    clip.origin_tag = "synthetic";
    clip.frames = Tensor::zeros({T, spec.height, spec.width, 3});

    std::vector<double> sx(sprites.size()), sy(sprites.size());
    for (std::size_t t = 0; t < T; ++t) {
        double tf = frozen ? 0.0 : static_cast<double>(t);
        // Sprite positions: integrate a slowly turning, pulsing velocity in
        // closed form so each frame stays independent of evaluation order.
        for (std::size_t i = 0; i < sprites.size(); ++i) {
            const auto& s = sprites[i];
            double travel = spec.sprite_speed * s.speed_scale *
                            (tf + 0.35 * s.pulse_period / (2.0 * M_PI) *
                                      (std::cos(s.pulse_phase) -
                                       std::cos(2.0 * M_PI * tf / s.pulse_period + s.pulse_phase)));
            double heading = s.heading0 + 2.0 * M_PI * tf / s.turn_period;
            sx[i] = detail::reflect(s.x0 + travel * std::cos(heading), static_cast<double>(spec.width));
            sy[i] = detail::reflect(s.y0 + travel * std::sin(heading), static_cast<double>(spec.height));
        }
        double lum = 1.0 + (frozen ? 0.0 : spec.luminance_amplitude *
                                               std::sin(2.0 * M_PI * tf / lum_period + lum_phase));
        for (std::size_t y = 0; y < spec.height; ++y) {
            for (std::size_t x = 0; x < spec.width; ++x) {
                double px[3] = {0.45, 0.45, 0.45};
                for (const auto& g : gratings) {
                    double phase = g.phase0 + g.kx * static_cast<double>(x) +
                                   g.ky * static_cast<double>(y) +
                                   spec.background_speed *
                                       (g.drift_rate * tf +
                                        g.wobble_amp *
                                            std::sin(2.0 * M_PI * tf / g.wobble_period + g.wobble_phase));
                    double v = std::cos(phase);
                    for (int c = 0; c < 3; ++c) px[c] += g.weight[c] * v;
                }
                for (std::size_t i = 0; i < sprites.size(); ++i) {
                    double dx = static_cast<double>(x) - sx[i];
                    double dy = static_cast<double>(y) - sy[i];
                    double d = std::sqrt(dx * dx + dy * dy);
                    double alpha = std::clamp(sprites[i].radius - d, 0.0, 1.0);
                    if (alpha <= 0.0) continue;
                    for (int c = 0; c < 3; ++c)
                        px[c] = (1.0 - alpha) * px[c] + alpha * sprites[i].color[c];
                }
                for (std::size_t c = 0; c < 3; ++c)
                    clip.frames.at(t, y, x, c) = std::clamp(px[c] * lum, 0.0, 1.0);
            }
        }
    }
    clip.validate();
    return clip;
}

// Cut [start_frame, start_frame + n_frames) out of a longer clip.
inline VideoClip slice_clip(const VideoClip& clip, std::size_t start_frame, std::size_t n_frames,
                            const std::string& origin_tag) {
    clip.validate();
    require_shape(n_frames >= 1, "slice_clip: empty slice");
    require_shape(start_frame + n_frames <= clip.n_frames(), "slice_clip: out of range");
    std::size_t H = clip.height(), W = clip.width();
    VideoClip out;
    out.frame_rate_hz = clip.frame_rate_hz;
    out.origin_tag = origin_tag;
    out.frames = Tensor::zeros({n_frames, H, W, 3});
    std::size_t stride = H * W * 3;
    std::copy_n(clip.frames.vec().begin() + static_cast<std::ptrdiff_t>(start_frame * stride),
                n_frames * stride, out.frames.vec().begin());
    return out;
}

// Mirror the frames left-right (data augmentation for self-supervised clips).
inline VideoClip hflip_clip(const VideoClip& clip) {
    clip.validate();
    VideoClip out = clip;
    std::size_t T = clip.n_frames(), H = clip.height(), W = clip.width();
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x)
                for (std::size_t c = 0; c < 3; ++c)
                    out.frames.at(t, y, x, c) = clip.frames.at(t, y, W - 1 - x, c);
    return out;
}

}  // namespace nvrd::sim
