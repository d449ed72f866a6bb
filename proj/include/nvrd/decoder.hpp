#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nvrd/autodiff.hpp"
#include "nvrd/checkpoint.hpp"
#include "nvrd/encoder.hpp"
#include "nvrd/errors.hpp"
#include "nvrd/features.hpp"
#include "nvrd/rng.hpp"
#include "nvrd/ssl_data.hpp"
#include "nvrd/tensor.hpp"
#include "nvrd/video.hpp"

namespace nvrd {

// ---------------------------------------------------------------------------
// Frozen feature stacks used by the decoder losses. The spatial stack scores
// single frames; the motion stack takes a frame plus a temporal-difference
// image (6 channels). Decoder losses run the motion stack with the difference
// channels held at zero, so each output frame is scored on its own and a
// multi-frame loss decomposes into a sum of per-frame terms.
// ---------------------------------------------------------------------------

struct FeatureStacks {
    FeatureExtractor spatial;
    FeatureExtractor motion;
};

inline FeatureStacks make_feature_stacks(std::uint64_t seed) {
    FeatureStackSpec spatial;
    spatial.seed = mix_seed(seed, 0x73706174u);
    spatial.in_channels = 3;
    FeatureStackSpec motion;
    motion.seed = mix_seed(seed, 0x6d6f746eu);
    motion.in_channels = 6;
    return FeatureStacks{make_extractor(spatial), make_extractor(motion)};
}

// ---------------------------------------------------------------------------
// Decoder model. One measurement vector (or two consecutive ones) is mapped
// through a dense layer onto a coarse grid of frame seeds, then a shared
// convolutional stack upsamples each seed to a full frame. The dense layer
// gives every output frame its own rows; the convolutions are shared across
// frames, so frame count only changes the dense layer's size.
// ---------------------------------------------------------------------------

enum class DecoderMode { half_hz, high_rate };

struct DecoderArch {
    std::size_t base_ch = 16;  // channels on the coarse seed grid
    std::size_t up1_ch = 16;   // channels after the first upsampling stage
    std::size_t up2_ch = 8;    // channels after the second upsampling stage
};

struct DecoderModel {
    DecoderMode mode = DecoderMode::half_hz;
    std::size_t n_voxels = 0;
    std::size_t n_frames = 1;  // frames produced per forward pass
    std::size_t height = 0;
    std::size_t width = 0;
    DecoderArch arch;

    Tensor fc_w, fc_b;        // (n_frames*gh*gw*base, scans_in*V), (out)
    Tensor conv1_w, conv1_b;  // (3,3,base,up1)
    Tensor conv2_w, conv2_b;  // (3,3,up1,up2)
    Tensor conv3_w, conv3_b;  // (3,3,up2,3)

    std::size_t scans_in() const { return mode == DecoderMode::high_rate ? 2 : 1; }
    std::size_t in_dim() const { return scans_in() * n_voxels; }
    std::size_t grid_h() const { return height / 8; }
    std::size_t grid_w() const { return width / 8; }

    std::vector<Tensor*> params() {
        return {&fc_w, &fc_b, &conv1_w, &conv1_b, &conv2_w, &conv2_b, &conv3_w, &conv3_b};
    }
    std::vector<const Tensor*> params() const {
        return {&fc_w, &fc_b, &conv1_w, &conv1_b, &conv2_w, &conv2_b, &conv3_w, &conv3_b};
    }

    void validate() const {
        require_config(n_voxels >= 1, "decoder: need at least one voxel");
        require_config(height >= 8 && width >= 8 && height % 8 == 0 && width % 8 == 0,
                       "decoder: frame size must be a positive multiple of 8");
        if (mode == DecoderMode::half_hz) {
            require_config(n_frames == 1, "decoder: half-rate mode emits exactly one frame");
        } else {
            require_config(n_frames >= 3 && n_frames % 2 == 1,
                           "decoder: high-rate mode needs an odd frame count of at least 3");
        }
    }
};

namespace detail {

inline void init_decoder_weights(DecoderModel& m, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x64656375u));
    std::size_t seed_dim = m.n_frames * m.grid_h() * m.grid_w() * m.arch.base_ch;
    m.fc_w = Tensor::zeros({seed_dim, m.in_dim()});
    m.fc_b = Tensor::zeros({seed_dim});
    double fc_scale = 1.0 / std::sqrt(static_cast<double>(m.in_dim()));
    for (double& v : m.fc_w.vec()) v = rng.normal(0.0, fc_scale);

    auto conv = [&rng](std::size_t cin, std::size_t cout) {
        Tensor w = Tensor::zeros({3, 3, cin, cout});
        double scale = 1.0 / std::sqrt(static_cast<double>(9 * cin));
        for (double& v : w.vec()) v = rng.normal(0.0, scale);
        return w;
    };
    m.conv1_w = conv(m.arch.base_ch, m.arch.up1_ch);
    m.conv1_b = Tensor::zeros({m.arch.up1_ch});
    m.conv2_w = conv(m.arch.up1_ch, m.arch.up2_ch);
    m.conv2_b = Tensor::zeros({m.arch.up2_ch});
    m.conv3_w = conv(m.arch.up2_ch, 3);
    m.conv3_b = Tensor::zeros({3});
}

// Copies frame t out of a (T,H,W,3) stack.
inline Tensor clip_frame(const Tensor& frames, std::size_t t) {
    require_shape(frames.rank() == 4 && t < frames.dim(0), "clip_frame: index out of range");
    std::size_t H = frames.dim(1), W = frames.dim(2), C = frames.dim(3);
    Tensor out = Tensor::zeros({H, W, C});
    std::size_t elems = H * W * C;
    const double* src = frames.vec().data() + t * elems;
    std::copy(src, src + elems, out.vec().data());
    return out;
}

}  // namespace detail

inline DecoderModel make_decoder_05(std::size_t n_voxels, std::size_t height, std::size_t width,
                                    std::uint64_t seed, const DecoderArch& arch = DecoderArch{}) {
    DecoderModel m;
    m.mode = DecoderMode::half_hz;
    m.n_voxels = n_voxels;
    m.n_frames = 1;
    m.height = height;
    m.width = width;
    m.arch = arch;
    m.validate();
    detail::init_decoder_weights(m, seed);
    return m;
}

inline DecoderModel make_decoder_hfr(std::size_t n_voxels, std::size_t n_frames,
                                     std::size_t height, std::size_t width, std::uint64_t seed,
                                     const DecoderArch& arch = DecoderArch{}) {
    DecoderModel m;
    m.mode = DecoderMode::high_rate;
    m.n_voxels = n_voxels;
    m.n_frames = n_frames;
    m.height = height;
    m.width = width;
    m.arch = arch;
    m.validate();
    detail::init_decoder_weights(m, seed);
    return m;
}

struct DecoderLeaves {
    std::vector<Graph::Ref> refs;  // same order as DecoderModel::params()
    Graph::Ref fc_w() const { return refs[0]; }
};

inline DecoderLeaves decoder_leaves(Graph& g, const DecoderModel& m, bool needs_grad) {
    DecoderLeaves l;
    for (const Tensor* p : m.params()) l.refs.push_back(g.leaf(*p, needs_grad));
    return l;
}

// Forward pass: measurement vector in, (n_frames,H,W,3) out, values in (0,1).
inline Graph::Ref decoder_forward(Graph& g, const DecoderModel& m, const DecoderLeaves& l,
                                  Graph::Ref r) {
    require_shape(g.value(r).numel() == m.in_dim(), "decoder_forward: measurement size mismatch");
    std::size_t gh = m.grid_h(), gw = m.grid_w();
    Graph::Ref x = g.dense(g.reshape(r, {m.in_dim()}), l.refs[0], l.refs[1]);
    x = g.reshape(x, {m.n_frames, gh, gw, m.arch.base_ch});
    x = g.resize_frames_nearest(x, 2 * gh, 2 * gw);
    x = g.relu(g.conv2d_frames(x, l.refs[2], l.refs[3], 1, true));
    x = g.resize_frames_nearest(x, 4 * gh, 4 * gw);
    x = g.relu(g.conv2d_frames(x, l.refs[4], l.refs[5], 1, true));
    x = g.resize_frames_nearest(x, m.height, m.width);
    x = g.conv2d_frames(x, l.refs[6], l.refs[7], 1, true);
    return g.sigmoid(x);
}

// Half-rate convenience: one measurement row, one (H,W,3) frame.
inline Graph::Ref decoder_forward_05(Graph& g, const DecoderModel& m, const DecoderLeaves& l,
                                     Graph::Ref r) {
    require_config(m.mode == DecoderMode::half_hz, "decoder_forward_05: wrong decoder mode");
    return g.slice_frame(decoder_forward(g, m, l, r), 0);
}

inline Tensor decoder_predict(const DecoderModel& m, const Tensor& r) {
    Graph g;
    DecoderLeaves l = decoder_leaves(g, m, false);
    return g.value(decoder_forward(g, m, l, g.leaf(r, false)));
}

inline Tensor decoder_predict_05(const DecoderModel& m, const Tensor& r) {
    Graph g;
    DecoderLeaves l = decoder_leaves(g, m, false);
    return g.value(decoder_forward_05(g, m, l, g.leaf(r, false)));
}

// ---------------------------------------------------------------------------
// High-rate output timing. A forward pass over two consecutive measurement
// windows covers four seconds of stimulus; the n output frames sample the
// middle two seconds evenly, from the center of the first window to the
// center of the second. Times are seconds from the first window's start.
// ---------------------------------------------------------------------------

inline std::vector<double> hfr_frame_times(std::size_t n_frames, double scan_seconds = 2.0) {
    require_config(n_frames >= 1, "hfr_frame_times: need at least one frame");
    require_config(scan_seconds > 0.0, "hfr_frame_times: scan length must be positive");
    std::vector<double> out;
    if (n_frames == 1) {
        out.push_back(scan_seconds * 0.5 + scan_seconds * 0.5);
        return out;
    }
    for (std::size_t k = 0; k < n_frames; ++k) {
        out.push_back(scan_seconds * 0.5 +
                      scan_seconds * static_cast<double>(k) / static_cast<double>(n_frames - 1));
    }
    return out;
}

// Global frame indices into the concatenation of the two windows' frames.
inline std::vector<std::size_t> hfr_target_global_indices(std::size_t n_frames,
                                                          std::size_t frames_per_scan) {
    require_config(frames_per_scan >= 2, "hfr targets: need at least two frames per window");
    std::vector<double> times = hfr_frame_times(n_frames, 1.0);
    std::vector<std::size_t> out;
    for (double t : times) {
        auto idx = static_cast<std::size_t>(
            std::llround(t * static_cast<double>(frames_per_scan)));
        require_shape(idx < 2 * frames_per_scan, "hfr targets: index out of the double window");
        out.push_back(idx);
    }
    return out;
}

// Ground-truth frames for a pass over two adjacent window clips.
inline Tensor hfr_target_frames(const sim::VideoClip& v1, const sim::VideoClip& v2,
                                std::size_t n_frames) {
    v1.validate();
    v2.validate();
    require_shape(v1.frames.shape() == v2.frames.shape() && v1.frame_rate_hz == v2.frame_rate_hz,
                  "hfr targets: windows must share shape and rate");
    std::size_t fps = v1.n_frames();
    std::vector<std::size_t> idx = hfr_target_global_indices(n_frames, fps);
    std::size_t H = v1.height(), W = v1.width();
    Tensor out = Tensor::zeros({n_frames, H, W, 3});
    std::size_t elems = H * W * 3;
    for (std::size_t k = 0; k < n_frames; ++k) {
        const Tensor& src = idx[k] < fps ? v1.frames : v2.frames;
        std::size_t local = idx[k] < fps ? idx[k] : idx[k] - fps;
        const double* from = src.vec().data() + local * elems;
        std::copy(from, from + elems, out.vec().data() + k * elems);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Losses. The supervised frame loss mixes the spatial feature distance with
// the motion-stack distance computed on zero-difference inputs; a multi-frame
// prediction is scored as the sum of independent per-frame losses, so a
// one-frame pass and the general pass agree by construction.
// ---------------------------------------------------------------------------

inline Graph::Ref loss_supervised_frame(Graph& g, const FeatureStacks& stacks, Graph::Ref pred,
                                        Graph::Ref target, double w_spatial, double w_motion) {
    // Adding nodes can reallocate the tape, so take a copy of the shape now.
    std::vector<std::size_t> shape = g.value(pred).shape();
    require_shape(shape.size() == 3 && shape[2] == 3, "supervised loss: frames must be (H,W,3)");
    require_shape(shape == g.value(target).shape(), "supervised loss: shape mismatch");
    Graph::Ref total = g.constant_scalar(0.0);
    if (w_spatial != 0.0) {
        total = g.add(total,
                      g.scale(feature_loss_node(g, stacks.spatial, pred, target), w_spatial));
    }
    if (w_motion != 0.0) {
        Graph::Ref zeros = g.leaf(Tensor::zeros(shape), false);
        Graph::Ref pm = g.concat_last(pred, zeros);
        Graph::Ref tm = g.concat_last(target, zeros);
        total = g.add(total, g.scale(feature_loss_node(g, stacks.motion, pm, tm), w_motion));
    }
    return total;
}

inline Graph::Ref loss_supervised_frame(Graph& g, const FeatureStacks& stacks, Graph::Ref pred,
                                        const Tensor& target, double w_spatial, double w_motion) {
    return loss_supervised_frame(g, stacks, pred, g.leaf(target, false), w_spatial, w_motion);
}

inline Graph::Ref loss_supervised_hfr(Graph& g, const FeatureStacks& stacks, Graph::Ref pred,
                                      const Tensor& targets, double w_spatial, double w_motion) {
    require_shape(g.value(pred).rank() == 4 && targets.rank() == 4 &&
                      g.value(pred).shape() == targets.shape(),
                  "supervised loss: need matching (T,H,W,3) stacks");
    std::size_t frames = targets.dim(0);
    Graph::Ref target_stack = g.leaf(targets, false);
    Graph::Ref total = g.constant_scalar(0.0);
    for (std::size_t k = 0; k < frames; ++k) {
        total = g.add(total, loss_supervised_frame(g, stacks, g.slice_frame(pred, k),
                                                   g.slice_frame(target_stack, k), w_spatial,
                                                   w_motion));
    }
    return total;
}

// Cycle loss, half-rate form: encode a clip with the frozen encoder, decode
// the measurement back, and score the result against the clip's middle frame.
// The encoder runs outside the tape, so its weights see no gradient at all.
template <typename EncodeFn>
    requires std::invocable<EncodeFn&, const sim::VideoClip&>
Graph::Ref loss_cycle(Graph& g, EncodeFn&& encode, const DecoderModel& dec,
                      const DecoderLeaves& dl, const FeatureStacks& stacks,
                      const sim::VideoClip& clip, double w_spatial, double w_motion) {
    Tensor r = encode(clip);
    require_shape(r.numel() == dec.n_voxels, "cycle loss: encoder output size mismatch");
    Graph::Ref pred = decoder_forward_05(g, dec, dl, g.leaf(r, false));
    Tensor target = detail::clip_frame(clip.frames, clip.n_frames() / 2);
    return loss_supervised_frame(g, stacks, pred, target, w_spatial, w_motion);
}

inline Graph::Ref loss_cycle(Graph& g, const EncoderModel& enc, const DecoderModel& dec,
                             const DecoderLeaves& dl, const FeatureStacks& stacks,
                             const sim::VideoClip& clip, double w_spatial, double w_motion) {
    require_shape(clip.n_frames() == enc.frames_per_sample,
                  "cycle loss: clip length must match the encoder window");
    auto encode = [&enc](const sim::VideoClip& c) { return encoder_predict(enc, c.frames, 0); };
    return loss_cycle(g, encode, dec, dl, stacks, clip, w_spatial, w_motion);
}

// Cycle loss, high-rate form: encode both windows of an adjacent pair, decode
// the concatenated measurements, and score every output frame against the
// evenly sampled ground-truth frames. Encoder and decoder enter as callables
// so tests can substitute either side.
template <typename EncodeFn, typename DecodeFn>
    requires std::invocable<EncodeFn&, const sim::VideoClip&>
Graph::Ref loss_cycle_hfr(Graph& g, EncodeFn&& encode, DecodeFn&& decode,
                          const FeatureStacks& stacks, const sim::OverlapPair& pair,
                          std::size_t n_frames, double w_spatial, double w_motion) {
    Tensor r1 = encode(pair.v1);
    Tensor r2 = encode(pair.v2);
    require_shape(r1.numel() == r2.numel(), "cycle loss: window encodings differ in size");
    Graph::Ref r = g.concat_last(g.leaf(r1, false), g.leaf(r2, false));
    Graph::Ref pred = decode(g, r);
    Tensor targets = hfr_target_frames(pair.v1, pair.v2, n_frames);
    return loss_supervised_hfr(g, stacks, pred, targets, w_spatial, w_motion);
}

inline Graph::Ref loss_cycle_hfr(Graph& g, const EncoderModel& enc, const DecoderModel& dec,
                                 const DecoderLeaves& dl, const FeatureStacks& stacks,
                                 const sim::OverlapPair& pair, double w_spatial,
                                 double w_motion) {
    require_config(dec.mode == DecoderMode::high_rate, "cycle loss: wrong decoder mode");
    require_shape(pair.v1.n_frames() == enc.frames_per_sample,
                  "cycle loss: window length must match the encoder");
    auto encode = [&enc](const sim::VideoClip& c) { return encoder_predict(enc, c.frames, 0); };
    auto decode = [&dec, &dl](Graph& gg, Graph::Ref r) {
        return decoder_forward(gg, dec, dl, r);
    };
    return loss_cycle_hfr(g, encode, decode, stacks, pair, dec.n_frames, w_spatial, w_motion);
}

// Agreement between two reconstructions of the same instant: the last frame
// of one pass and the first frame of the next pass over overlapping windows.
inline Graph::Ref loss_recon_consistency(Graph& g, Graph::Ref frame_a, Graph::Ref frame_b) {
    require_shape(g.value(frame_a).shape() == g.value(frame_b).shape(),
                  "consistency loss: frames must share a shape");
    return g.l2_norm(g.sub(frame_a, frame_b));
}

inline double recon_consistency(const Tensor& frame_a, const Tensor& frame_b) {
    require_shape(frame_a.shape() == frame_b.shape(),
                  "consistency loss: frames must share a shape");
    double acc = 0.0;
    for (std::size_t i = 0; i < frame_a.numel(); ++i) {
        double d = frame_a[i] - frame_b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

// Structural penalty: mean total variation of the output frames plus a group
// lasso over the dense layer's rows, which prunes unused seed cells.
inline Graph::Ref decoder_regularizer(Graph& g, const DecoderLeaves& dl, Graph::Ref pred) {
    require_shape(g.value(pred).rank() == 4, "decoder regularizer: need a (T,H,W,C) stack");
    std::size_t frames = g.value(pred).dim(0);
    std::vector<Graph::Ref> tvs;
    for (std::size_t k = 0; k < frames; ++k) {
        tvs.push_back(g.total_variation(g.slice_frame(pred, k)));
    }
    return g.add(g.average(tvs), g.group_lasso_rows(dl.fc_w()));
}

// ---------------------------------------------------------------------------
// Temporal order prior. A small convolutional network embeds a clip from its
// frame-pair motion inputs; a binary head is trained to tell ordered clips
// from shuffled ones. Once trained, the embedding distance between a clip and
// its reconstruction penalizes implausible motion. Off unless asked for.
// ---------------------------------------------------------------------------

struct TemporalPriorArch {
    std::size_t input_hw = 56;  // frames are resized to this square before conv
    std::size_t c1 = 8, c2 = 16, c3 = 32;
};

struct TemporalPriorNet {
    TemporalPriorArch arch;
    Tensor conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b;
    Tensor head_w, head_b;

    std::size_t emb_hw() const { return arch.input_hw / 8; }
    std::size_t emb_dim() const { return emb_hw() * emb_hw() * arch.c3; }

    std::vector<Tensor*> params() {
        return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &conv3_w, &conv3_b, &head_w, &head_b};
    }
    std::vector<const Tensor*> params() const {
        return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &conv3_w, &conv3_b, &head_w, &head_b};
    }

    void validate() const {
        require_config(arch.input_hw >= 8 && arch.input_hw % 8 == 0,
                       "temporal prior: input size must be a positive multiple of 8");
        require_config(arch.c1 >= 1 && arch.c2 >= 1 && arch.c3 >= 1,
                       "temporal prior: channel counts must be positive");
    }
};

inline TemporalPriorNet make_temporal_prior(std::uint64_t seed,
                                            const TemporalPriorArch& arch = TemporalPriorArch{}) {
    TemporalPriorNet net;
    net.arch = arch;
    net.validate();
    Rng rng(mix_seed(seed, 0x7072696fu));
    auto conv = [&rng](std::size_t cin, std::size_t cout) {
        Tensor w = Tensor::zeros({3, 3, cin, cout});
        double scale = 1.0 / std::sqrt(static_cast<double>(9 * cin));
        for (double& v : w.vec()) v = rng.normal(0.0, scale);
        return w;
    };
    net.conv1_w = conv(6, arch.c1);
    net.conv1_b = Tensor::zeros({arch.c1});
    net.conv2_w = conv(arch.c1, arch.c2);
    net.conv2_b = Tensor::zeros({arch.c2});
    net.conv3_w = conv(arch.c2, arch.c3);
    net.conv3_b = Tensor::zeros({arch.c3});
    net.head_w = Tensor::zeros({1, 2 * net.emb_dim()});
    double head_scale = 1.0 / std::sqrt(static_cast<double>(2 * net.emb_dim()));
    for (double& v : net.head_w.vec()) v = rng.normal(0.0, head_scale);
    net.head_b = Tensor::zeros({1});
    return net;
}

struct PriorLeaves {
    std::vector<Graph::Ref> refs;  // same order as TemporalPriorNet::params()
};

inline PriorLeaves prior_leaves(Graph& g, const TemporalPriorNet& net, bool needs_grad) {
    PriorLeaves l;
    for (const Tensor* p : net.params()) l.refs.push_back(g.leaf(*p, needs_grad));
    return l;
}

// Pads a short stack to min_t frames by repeating the end frames, keeping the
// original frames centered. Motion pairs at the pad are static, which is the
// least committal extension of a short clip.
inline Graph::Ref replicate_pad_frames(Graph& g, Graph::Ref frames, std::size_t min_t) {
    const Tensor& v = g.value(frames);
    require_shape(v.rank() == 4, "replicate_pad_frames: need a (T,H,W,C) stack");
    std::size_t T = v.dim(0);
    if (T >= min_t) return frames;
    std::size_t pad = min_t - T, left = pad / 2;
    std::vector<Graph::Ref> slices;
    for (std::size_t k = 0; k < min_t; ++k) {
        std::size_t src = k < left ? 0 : std::min(k - left, T - 1);
        slices.push_back(g.slice_frame(frames, src));
    }
    return g.stack_frames(slices);
}

namespace detail {

// Per-pair convolutional features: frames resized to the working square,
// consecutive pairs stacked as frame-plus-difference inputs, three stride-2
// convolutions. Output shape (T-1, input_hw/8, input_hw/8, c3).
inline Graph::Ref prior_pair_features(Graph& g, const TemporalPriorNet& net,
                                      const PriorLeaves& l, Graph::Ref frames) {
    const Tensor& v = g.value(frames);
    require_shape(v.rank() == 4 && v.dim(3) == 3, "prior embedding: need a (T,H,W,3) stack");
    require_shape(v.dim(0) >= 2, "prior embedding: need at least two frames");
    std::size_t T = v.dim(0), hw = net.arch.input_hw;
    Graph::Ref rs = g.resize_frames_nearest(frames, hw, hw);
    std::vector<Graph::Ref> pairs;
    for (std::size_t t = 1; t < T; ++t) {
        Graph::Ref cur = g.slice_frame(rs, t);
        Graph::Ref prev = g.slice_frame(rs, t - 1);
        pairs.push_back(g.concat_last(cur, g.sub(cur, prev)));
    }
    Graph::Ref x = g.stack_frames(pairs);
    x = g.relu(g.conv2d_frames(x, l.refs[0], l.refs[1], 2, true));
    x = g.relu(g.conv2d_frames(x, l.refs[2], l.refs[3], 2, true));
    return g.relu(g.conv2d_frames(x, l.refs[4], l.refs[5], 2, true));
}

}  // namespace detail

// Clip embedding: mean of the pair features over time.
inline Graph::Ref temporal_prior_embedding(Graph& g, const TemporalPriorNet& net,
                                           const PriorLeaves& l, Graph::Ref frames) {
    return g.mean_time(detail::prior_pair_features(g, net, l, frames));
}

inline Tensor temporal_prior_embedding(const TemporalPriorNet& net, const Tensor& frames) {
    Graph g;
    PriorLeaves l = prior_leaves(g, net, false);
    return g.value(temporal_prior_embedding(g, net, l, g.leaf(frames, false)));
}

// Order logit: negative favors "ordered", positive favors "shuffled". The
// head reads the first and second moments of the pair features over time;
// an ordered clip repeats one displacement, so its features barely vary,
// while a shuffled clip mixes jump sizes and directions.
inline Graph::Ref prior_logit(Graph& g, const TemporalPriorNet& net, const PriorLeaves& l,
                              Graph::Ref frames) {
    Graph::Ref x = detail::prior_pair_features(g, net, l, frames);
    Graph::Ref mean = g.reshape(g.mean_time(x), {net.emb_dim()});
    Graph::Ref second = g.reshape(g.mean_time(g.mul(x, x)), {net.emb_dim()});
    return g.dense(g.concat_last(mean, second), l.refs[6], l.refs[7]);
}

struct PriorTrainConfig {
    std::size_t epochs = 6;
    std::size_t batch = 4;
    double lr = 2e-3;
    double val_fraction = 0.25;
    std::uint64_t seed = 0;
};

struct PriorTrainResult {
    std::vector<double> epoch_loss;
    double val_accuracy = 0.0;
    std::size_t steps = 0;
};

namespace detail {

// A random permutation of the frame axis with enough total displacement to
// be visibly out of order. A bare non-identity draw can be a single swap of
// neighbors, which is a near-ordered clip with a "shuffled" label; those
// poison the training signal, so they are rejected.
inline Tensor shuffled_frames(const Tensor& frames, Rng& rng) {
    std::size_t T = frames.dim(0);
    std::vector<std::size_t> perm(T);
    for (std::size_t i = 0; i < T; ++i) perm[i] = i;
    auto displacement = [&perm] {
        std::size_t total = 0;
        for (std::size_t i = 0; i < perm.size(); ++i)
            total += perm[i] > i ? perm[i] - i : i - perm[i];
        return total;
    };
    do {
        rng.shuffle(perm);
    } while (displacement() < T);
    Tensor out = Tensor::zeros(frames.shape());
    std::size_t elems = frames.numel() / T;
    for (std::size_t i = 0; i < T; ++i) {
        const double* src = frames.vec().data() + perm[i] * elems;
        std::copy(src, src + elems, out.vec().data() + i * elems);
    }
    return out;
}

}  // namespace detail

// Trains the order head on an ordered-versus-shuffled task over a clip pool.
// Every clip contributes one ordered pass (label 0) and one freshly shuffled
// pass (label 1) per epoch. A held-out slice of the pool reports accuracy.
inline PriorTrainResult train_temporal_prior(TemporalPriorNet& net,
                                             const std::vector<const sim::VideoClip*>& pool,
                                             const PriorTrainConfig& cfg) {
    net.validate();
    require_config(cfg.epochs >= 1 && cfg.batch >= 1 && cfg.lr > 0.0, "prior train: bad config");
    require_config(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0,
                   "prior train: validation fraction must be inside (0,1)");
    require(pool.size() >= 8, "prior train: clip pool is too small");
    for (const sim::VideoClip* c : pool) {
        require(c != nullptr && c->n_frames() >= 2, "prior train: clips need two or more frames");
    }

    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng(mix_seed(cfg.seed, 0x70727630u));
    split_rng.shuffle(order);
    auto n_val = static_cast<std::size_t>(
        std::llround(cfg.val_fraction * static_cast<double>(pool.size())));
    n_val = std::max<std::size_t>(1, std::min(n_val, pool.size() - 1));
    std::vector<std::size_t> val(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train(order.begin() + n_val, order.end());

    std::vector<Tensor*> params = net.params();
    AdaptiveOptimizer opt;
    PriorTrainResult res;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, 0x70727631u, epoch));
        rng.shuffle(train);
        double loss_acc = 0.0;
        for (std::size_t start = 0; start < train.size(); start += cfg.batch) {
            std::size_t stop = std::min(train.size(), start + cfg.batch);
            std::vector<Tensor> grad_acc;
            for (Tensor* p : params) grad_acc.push_back(Tensor::zeros(p->shape()));
            double inv = 1.0 / static_cast<double>(2 * (stop - start));
            for (std::size_t i = start; i < stop; ++i) {
                const Tensor& frames = pool[train[i]]->frames;
                Tensor shuffled = detail::shuffled_frames(frames, rng);
                const Tensor* inputs[2] = {&frames, &shuffled};
                double labels[2] = {0.0, 1.0};
                for (int s = 0; s < 2; ++s) {
                    Graph g;
                    PriorLeaves l = prior_leaves(g, net, true);
                    Graph::Ref logit = prior_logit(g, net, l, g.leaf(*inputs[s], false));
                    Graph::Ref loss = g.scale(g.logistic_loss(logit, labels[s]), inv);
                    g.backward(loss);
                    loss_acc += g.value(loss)[0] / inv;
                    for (std::size_t k = 0; k < params.size(); ++k) {
                        const Tensor& gk = g.grad(l.refs[k]);
                        for (std::size_t j = 0; j < gk.numel(); ++j) grad_acc[k][j] += gk[j];
                    }
                }
            }
            opt.step(params, grad_acc, cfg.lr);
            ++res.steps;
        }
        res.epoch_loss.push_back(loss_acc / static_cast<double>(2 * train.size()));
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < val.size(); ++i) {
        const Tensor& frames = pool[val[i]]->frames;
        Rng rng(mix_seed(cfg.seed, 0x70727632u, i));
        Tensor shuffled = detail::shuffled_frames(frames, rng);
        Graph g;
        PriorLeaves l = prior_leaves(g, net, false);
        if (g.value(prior_logit(g, net, l, g.leaf(frames, false)))[0] < 0.0) ++correct;
        if (g.value(prior_logit(g, net, l, g.leaf(shuffled, false)))[0] > 0.0) ++correct;
    }
    res.val_accuracy = static_cast<double>(correct) / static_cast<double>(2 * val.size());
    return res;
}

// Embedding distance between a target clip and a reconstruction. The prior
// network is frozen here; gradients reach only the reconstruction. Short
// stacks are replicate-padded so three stride-2 stages always have support.
inline Graph::Ref loss_temporal_prior(Graph& g, const TemporalPriorNet& net,
                                      const Tensor& target_frames, Graph::Ref pred_frames) {
    require_shape(target_frames.shape() == g.value(pred_frames).shape(),
                  "prior loss: stacks must share a shape");
    PriorLeaves l = prior_leaves(g, net, false);
    Graph::Ref tgt = replicate_pad_frames(g, g.leaf(target_frames, false), 5);
    Graph::Ref prd = replicate_pad_frames(g, pred_frames, 5);
    Graph::Ref emb_t = temporal_prior_embedding(g, net, l, tgt);
    Graph::Ref emb_p = temporal_prior_embedding(g, net, l, prd);
    return g.l1_norm(g.sub(emb_p, emb_t));
}

// ---------------------------------------------------------------------------
// Training data and configuration. Paired samples carry a measurement vector
// with its ground-truth frame(s); unpaired material drives the cycle and
// consistency terms. High-rate self-supervision runs on window triples: one
// pass over (w1,w2) takes the cycle loss, a second pass over (w2,w3) shares
// an instant with the first, and the two are tied by the consistency loss.
// ---------------------------------------------------------------------------

struct PairedFrameSample {
    Tensor r;       // (V)
    Tensor target;  // (H,W,3)
};

struct PairedHfrSample {
    Tensor r;        // (2V), two consecutive measurement rows
    Tensor targets;  // (n_frames,H,W,3)
};

struct DecoderTrainData {
    std::vector<PairedFrameSample> paired_frames;   // half-rate supervision
    std::vector<PairedHfrSample> paired_windows;    // high-rate supervision
    std::vector<sim::VideoClip> cycle_clips;        // half-rate self-supervision
    std::vector<sim::OverlapTriple> cycle_triples;  // high-rate self-supervision
};

struct DecoderLossWeights {
    double w_spatial = 1.0;
    double w_motion = 1.0;
    double w_cycle = 1.0;
    double w_consistency = 0.0;
    double w_regularize = 0.35;
    double w_prior = 0.0;

    static DecoderLossWeights for_half_hz() { return DecoderLossWeights{}; }
    static DecoderLossWeights for_hfr() {
        DecoderLossWeights w;
        w.w_cycle = 0.25;
        w.w_consistency = 0.25;
        w.w_regularize = 0.35;
        w.w_prior = 0.15;
        return w;
    }

    void validate() const {
        for (double v : {w_spatial, w_motion, w_cycle, w_consistency, w_regularize, w_prior}) {
            require_config(std::isfinite(v) && v >= 0.0,
                           "decoder weights: values must be finite and non-negative");
        }
    }
};

struct DecoderTrainConfig {
    std::size_t epochs = 6;
    std::size_t paired_batch = 4;
    std::size_t unpaired_batch = 4;
    double lr = 1e-3;
    double lr_decay = 0.2;
    std::size_t lr_step = 0;  // epochs between decays; 0 keeps the rate constant
    double ssl_scale = 1.0;   // weight of the unpaired half of each step
    bool use_temporal_prior = false;
    bool supervised_only = false;    // ablation: drop the unpaired half entirely
    bool no_consistency = false;     // ablation: drop the consistency tie
    bool synthetic_only_ssl = false; // ablation: unpaired pool restricted to synthetic clips
    std::uint64_t seed = 0;

    static DecoderTrainConfig half_hz_defaults() { return DecoderTrainConfig{}; }
    static DecoderTrainConfig hfr_defaults(std::size_t epochs) {
        DecoderTrainConfig cfg;
        cfg.epochs = epochs;
        cfg.lr = 5e-4;
        cfg.lr_decay = 0.2;
        cfg.lr_step = std::max<std::size_t>(1, epochs / 4);
        cfg.ssl_scale = 2.0;
        return cfg;
    }
};

struct DecoderTrainHistory {
    std::vector<double> epoch_total;
    std::vector<double> epoch_supervised;
    std::vector<double> epoch_ssl;
    std::size_t steps = 0;
    std::size_t unpaired_batches = 0;
};

// Joint step over one paired batch and one unpaired batch: both halves
// accumulate into the same gradient, the optimizer steps once. The encoder
// is read-only throughout; its weights are bit-identical before and after.
inline DecoderTrainHistory train_decoder(DecoderModel& dec, const EncoderModel& enc,
                                         const FeatureStacks& stacks,
                                         const DecoderTrainData& data,
                                         const DecoderLossWeights& w,
                                         const DecoderTrainConfig& cfg,
                                         const TemporalPriorNet* prior = nullptr) {
    dec.validate();
    w.validate();
    require_config(cfg.epochs >= 1 && cfg.paired_batch >= 1 && cfg.unpaired_batch >= 1 &&
                       cfg.lr > 0.0 && cfg.ssl_scale > 0.0,
                   "decoder train: bad config");
    bool hfr = dec.mode == DecoderMode::high_rate;
    if (cfg.use_temporal_prior) {
        require_config(hfr, "decoder train: the temporal prior needs multi-frame output");
        require_config(prior != nullptr, "decoder train: temporal prior enabled but missing");
    }

    std::size_t n_paired = hfr ? data.paired_windows.size() : data.paired_frames.size();
    require_config(n_paired >= 1, "decoder train: no paired samples for this mode");

    std::vector<std::size_t> ssl_pool;
    if (!cfg.supervised_only) {
        if (hfr) {
            for (std::size_t i = 0; i < data.cycle_triples.size(); ++i) {
                if (!cfg.synthetic_only_ssl ||
                    data.cycle_triples[i].v1.origin_tag == "synthetic") {
                    ssl_pool.push_back(i);
                }
            }
        } else {
            for (std::size_t i = 0; i < data.cycle_clips.size(); ++i) {
                if (!cfg.synthetic_only_ssl || data.cycle_clips[i].origin_tag == "synthetic") {
                    ssl_pool.push_back(i);
                }
            }
        }
        require_config(!ssl_pool.empty(), "decoder train: no unpaired samples for this mode");
    }

    std::vector<Tensor*> params = dec.params();
    AdaptiveOptimizer opt;
    DecoderTrainHistory hist;
    double lr = cfg.lr;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch > 0 && cfg.lr_step > 0 && epoch % cfg.lr_step == 0) lr *= cfg.lr_decay;
        std::vector<std::size_t> order(n_paired);
        for (std::size_t i = 0; i < n_paired; ++i) order[i] = i;
        Rng rng(mix_seed(cfg.seed, 0x64637061u, epoch));
        rng.shuffle(order);
        Rng ssl_rng(mix_seed(cfg.seed, 0x64637373u, epoch));
        if (!ssl_pool.empty()) ssl_rng.shuffle(ssl_pool);
        std::size_t ssl_cursor = 0;

        double sup_acc = 0.0, ssl_acc = 0.0;
        std::size_t ssl_count = 0;
        for (std::size_t start = 0; start < n_paired; start += cfg.paired_batch) {
            std::size_t stop = std::min(n_paired, start + cfg.paired_batch);
            std::vector<Tensor> grad_acc;
            for (Tensor* p : params) grad_acc.push_back(Tensor::zeros(p->shape()));

            double inv = 1.0 / static_cast<double>(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                Graph g;
                DecoderLeaves dl = decoder_leaves(g, dec, true);
                Graph::Ref loss;
                if (hfr) {
                    const PairedHfrSample& s = data.paired_windows[order[i]];
                    Graph::Ref pred = decoder_forward(g, dec, dl, g.leaf(s.r, false));
                    loss = loss_supervised_hfr(g, stacks, pred, s.targets, w.w_spatial,
                                               w.w_motion);
                    sup_acc += g.value(loss)[0];
                    loss = g.add(loss,
                                 g.scale(decoder_regularizer(g, dl, pred), w.w_regularize));
                } else {
                    const PairedFrameSample& s = data.paired_frames[order[i]];
                    Graph::Ref r = g.leaf(s.r, false);
                    Graph::Ref pred = decoder_forward(g, dec, dl, r);
                    loss = loss_supervised_frame(g, stacks, g.slice_frame(pred, 0), s.target,
                                                 w.w_spatial, w.w_motion);
                    sup_acc += g.value(loss)[0];
                    loss = g.add(loss,
                                 g.scale(decoder_regularizer(g, dl, pred), w.w_regularize));
                }
                loss = g.scale(loss, inv);
                g.backward(loss);
                for (std::size_t k = 0; k < params.size(); ++k) {
                    const Tensor& gk = g.grad(dl.refs[k]);
                    for (std::size_t j = 0; j < gk.numel(); ++j) grad_acc[k][j] += gk[j];
                }
            }

            if (!ssl_pool.empty()) {
                double sinv = cfg.ssl_scale / static_cast<double>(cfg.unpaired_batch);
                for (std::size_t b = 0; b < cfg.unpaired_batch; ++b) {
                    std::size_t pick = ssl_pool[ssl_cursor++ % ssl_pool.size()];
                    Graph g;
                    DecoderLeaves dl = decoder_leaves(g, dec, true);
                    Graph::Ref loss;
                    if (hfr) {
                        const sim::OverlapTriple& tr = data.cycle_triples[pick];
                        Tensor r1 = encoder_predict(enc, tr.v1.frames, 0);
                        Tensor r2 = encoder_predict(enc, tr.v2.frames, 0);
                        Graph::Ref ra =
                            g.concat_last(g.leaf(r1, false), g.leaf(r2, false));
                        Graph::Ref pred_a = decoder_forward(g, dec, dl, ra);
                        Tensor targets = hfr_target_frames(tr.v1, tr.v2, dec.n_frames);
                        Graph::Ref cyc = loss_supervised_hfr(g, stacks, pred_a, targets,
                                                             w.w_spatial, w.w_motion);
                        loss = g.scale(cyc, w.w_cycle);
                        if (!cfg.no_consistency && w.w_consistency > 0.0) {
                            Tensor r3 = encoder_predict(enc, tr.v3.frames, 0);
                            Graph::Ref rb =
                                g.concat_last(g.leaf(r2, false), g.leaf(r3, false));
                            Graph::Ref pred_b = decoder_forward(g, dec, dl, rb);
                            Graph::Ref tie = loss_recon_consistency(
                                g, g.slice_frame(pred_a, dec.n_frames - 1),
                                g.slice_frame(pred_b, 0));
                            loss = g.add(loss, g.scale(tie, w.w_consistency));
                        }
                        if (cfg.use_temporal_prior && w.w_prior > 0.0) {
                            Graph::Ref tp =
                                loss_temporal_prior(g, *prior, targets, pred_a);
                            loss = g.add(loss, g.scale(tp, w.w_prior));
                        }
                        ssl_acc += g.value(loss)[0];
                        loss = g.add(loss, g.scale(decoder_regularizer(g, dl, pred_a),
                                                   w.w_regularize));
                    } else {
                        const sim::VideoClip& clip = data.cycle_clips[pick];
                        Tensor r = encoder_predict(enc, clip.frames, 0);
                        Graph::Ref pred = decoder_forward(g, dec, dl, g.leaf(r, false));
                        Tensor target = detail::clip_frame(clip.frames, clip.n_frames() / 2);
                        Graph::Ref cyc =
                            loss_supervised_frame(g, stacks, g.slice_frame(pred, 0), target,
                                                  w.w_spatial, w.w_motion);
                        loss = g.scale(cyc, w.w_cycle);
                        ssl_acc += g.value(loss)[0];
                        loss = g.add(loss, g.scale(decoder_regularizer(g, dl, pred),
                                                   w.w_regularize));
                    }
                    loss = g.scale(loss, sinv);
                    g.backward(loss);
                    for (std::size_t k = 0; k < params.size(); ++k) {
                        const Tensor& gk = g.grad(dl.refs[k]);
                        for (std::size_t j = 0; j < gk.numel(); ++j) grad_acc[k][j] += gk[j];
                    }
                    ++ssl_count;
                }
                ++hist.unpaired_batches;
            }

            opt.step(params, grad_acc, lr);
            ++hist.steps;
        }
        double sup_mean = sup_acc / static_cast<double>(n_paired);
        double ssl_mean = ssl_count ? ssl_acc / static_cast<double>(ssl_count) : 0.0;
        hist.epoch_supervised.push_back(sup_mean);
        hist.epoch_ssl.push_back(ssl_mean);
        hist.epoch_total.push_back(sup_mean + cfg.ssl_scale * ssl_mean);
    }
    return hist;
}

// ---------------------------------------------------------------------------
// Paired sample construction. Measurement row t is paired with the stimulus
// window that starts lag_trs scans earlier; the half-rate target is that
// window's middle frame, the high-rate targets sample two adjacent windows.
// ---------------------------------------------------------------------------

inline std::vector<PairedFrameSample> paired_frame_samples(const Tensor& fmri,
                                                           const sim::VideoClip& video,
                                                           std::size_t lag_trs,
                                                           std::size_t frames_per_scan) {
    require_shape(fmri.rank() == 2, "paired samples: measurements must be (T,V)");
    require_config(frames_per_scan >= 2, "paired samples: need two or more frames per scan");
    std::size_t T = fmri.dim(0), V = fmri.dim(1);
    std::vector<PairedFrameSample> out;
    for (std::size_t t = lag_trs; t < T; ++t) {
        std::size_t start = (t - lag_trs) * frames_per_scan;
        if (start + frames_per_scan > video.n_frames()) break;
        PairedFrameSample s;
        s.r = Tensor::zeros({V});
        for (std::size_t v = 0; v < V; ++v) s.r[v] = fmri.at(t, v);
        s.target = detail::clip_frame(video.frames, start + frames_per_scan / 2);
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<PairedHfrSample> paired_hfr_samples(const Tensor& fmri,
                                                       const sim::VideoClip& video,
                                                       std::size_t lag_trs,
                                                       std::size_t frames_per_scan,
                                                       std::size_t n_frames) {
    require_shape(fmri.rank() == 2, "paired samples: measurements must be (T,V)");
    require_config(frames_per_scan >= 2, "paired samples: need two or more frames per scan");
    std::size_t T = fmri.dim(0), V = fmri.dim(1);
    std::vector<PairedHfrSample> out;
    for (std::size_t t = lag_trs; t + 1 < T; ++t) {
        std::size_t start = (t - lag_trs) * frames_per_scan;
        if (start + 2 * frames_per_scan > video.n_frames()) break;
        PairedHfrSample s;
        s.r = Tensor::zeros({2 * V});
        for (std::size_t v = 0; v < V; ++v) {
            s.r[v] = fmri.at(t, v);
            s.r[V + v] = fmri.at(t + 1, v);
        }
        sim::VideoClip w1 = sim::slice_clip(video, start, frames_per_scan, video.origin_tag);
        sim::VideoClip w2 =
            sim::slice_clip(video, start + frames_per_scan, frames_per_scan, video.origin_tag);
        s.targets = hfr_target_frames(w1, w2, n_frames);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Series reconstruction. Every usable measurement row (or row pair) is
// decoded; each output frame records its stimulus-clock timestamp and the
// measurement rows it came from. Overlapping passes keep all their frames.
// ---------------------------------------------------------------------------

struct Reconstruction {
    Tensor frames;  // (N,H,W,3)
    std::vector<double> timestamps_s;
    std::vector<std::vector<std::size_t>> source_scans;
};

inline Reconstruction reconstruct_series(const DecoderModel& dec, const Tensor& fmri,
                                         double tr_seconds, std::size_t lag_trs) {
    dec.validate();
    require_shape(fmri.rank() == 2 && fmri.dim(1) == dec.n_voxels,
                  "reconstruct: measurements must be (T, n_voxels)");
    require_config(tr_seconds > 0.0, "reconstruct: scan interval must be positive");
    std::size_t T = fmri.dim(0), V = dec.n_voxels;
    bool hfr = dec.mode == DecoderMode::high_rate;
    std::size_t per_pass = dec.n_frames;
    std::size_t last = hfr ? (T >= 1 ? T - 1 : 0) : T;
    require_shape(last > lag_trs, "reconstruct: series too short for the pairing lag");

    std::vector<double> times = hfr_frame_times(per_pass, tr_seconds);
    std::size_t n_pass = last - lag_trs;
    std::size_t H = dec.height, W = dec.width, elems = H * W * 3;
    Reconstruction rec;
    rec.frames = Tensor::zeros({n_pass * per_pass, H, W, 3});
    for (std::size_t t = lag_trs; t < last; ++t) {
        Tensor r = Tensor::zeros({hfr ? 2 * V : V});
        for (std::size_t v = 0; v < V; ++v) {
            r[v] = fmri.at(t, v);
            if (hfr) r[V + v] = fmri.at(t + 1, v);
        }
        Tensor frames = decoder_predict(dec, r);
        std::size_t pass = t - lag_trs;
        double window_start = static_cast<double>(pass) * tr_seconds;
        std::copy(frames.vec().begin(), frames.vec().end(),
                  rec.frames.vec().data() + pass * per_pass * elems);
        for (std::size_t k = 0; k < per_pass; ++k) {
            rec.timestamps_s.push_back(window_start +
                                       (hfr ? times[k] : tr_seconds * 0.5));
            rec.source_scans.push_back(hfr ? std::vector<std::size_t>{t, t + 1}
                                           : std::vector<std::size_t>{t});
        }
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Checkpoints.
// ---------------------------------------------------------------------------

inline Checkpoint decoder_to_checkpoint(const DecoderModel& m) {
    Checkpoint ck;
    ck.meta = {{"kind", "decoder"},
               {"mode", m.mode == DecoderMode::high_rate ? "high_rate" : "half_hz"},
               {"n_voxels", m.n_voxels},
               {"n_frames", m.n_frames},
               {"height", m.height},
               {"width", m.width},
               {"base_ch", m.arch.base_ch},
               {"up1_ch", m.arch.up1_ch},
               {"up2_ch", m.arch.up2_ch}};
    const char* names[] = {"fc_w",    "fc_b",    "conv1_w", "conv1_b",
                           "conv2_w", "conv2_b", "conv3_w", "conv3_b"};
    auto ps = m.params();
    for (std::size_t i = 0; i < ps.size(); ++i) ck.tensors.emplace_back(names[i], *ps[i]);
    return ck;
}

inline DecoderModel decoder_from_checkpoint(const Checkpoint& ck) {
    require_io(ck.meta.value("kind", "") == "decoder", "checkpoint does not hold a decoder");
    DecoderModel m;
    m.mode = ck.meta.at("mode").get<std::string>() == "high_rate" ? DecoderMode::high_rate
                                                                  : DecoderMode::half_hz;
    m.n_voxels = ck.meta.at("n_voxels").get<std::size_t>();
    m.n_frames = ck.meta.at("n_frames").get<std::size_t>();
    m.height = ck.meta.at("height").get<std::size_t>();
    m.width = ck.meta.at("width").get<std::size_t>();
    m.arch.base_ch = ck.meta.at("base_ch").get<std::size_t>();
    m.arch.up1_ch = ck.meta.at("up1_ch").get<std::size_t>();
    m.arch.up2_ch = ck.meta.at("up2_ch").get<std::size_t>();
    auto ps = m.params();
    require_io(ck.tensors.size() == ps.size(), "decoder checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] = ck.tensors[i].second;
    m.validate();
    return m;
}

inline Checkpoint prior_to_checkpoint(const TemporalPriorNet& net) {
    Checkpoint ck;
    ck.meta = {{"kind", "temporal_prior"},
               {"input_hw", net.arch.input_hw},
               {"c1", net.arch.c1},
               {"c2", net.arch.c2},
               {"c3", net.arch.c3}};
    const char* names[] = {"conv1_w", "conv1_b", "conv2_w", "conv2_b",
                           "conv3_w", "conv3_b", "head_w",  "head_b"};
    auto ps = net.params();
    for (std::size_t i = 0; i < ps.size(); ++i) ck.tensors.emplace_back(names[i], *ps[i]);
    return ck;
}

inline TemporalPriorNet prior_from_checkpoint(const Checkpoint& ck) {
    require_io(ck.meta.value("kind", "") == "temporal_prior",
               "checkpoint does not hold a temporal prior");
    TemporalPriorNet net;
    net.arch.input_hw = ck.meta.at("input_hw").get<std::size_t>();
    net.arch.c1 = ck.meta.at("c1").get<std::size_t>();
    net.arch.c2 = ck.meta.at("c2").get<std::size_t>();
    net.arch.c3 = ck.meta.at("c3").get<std::size_t>();
    auto ps = net.params();
    require_io(ck.tensors.size() == ps.size(), "prior checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] = ck.tensors[i].second;
    net.validate();
    return net;
}

}  // namespace nvrd
