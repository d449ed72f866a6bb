#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nvrd/autodiff.hpp"
#include "nvrd/checkpoint.hpp"
#include "nvrd/errors.hpp"
#include "nvrd/rng.hpp"
#include "nvrd/stats.hpp"
#include "nvrd/tensor.hpp"

namespace nvrd {

// Maps one stimulus window (frames_per_sample frames) to one measurement
// vector. Per frame: a two-stage strided conv stem over the frame stacked
// with its temporal difference; then learned kernels collapse the frame axis;
// two more convs condense space; a dense readout emits one value per voxel.
struct EncoderModel {
    std::size_t n_voxels = 64;
    std::size_t frames_per_sample = 16;
    std::size_t height = 32, width = 32;
    std::size_t stem1_ch = 8, stem2_ch = 8;
    std::size_t collapse_m = 8;
    std::size_t post1_ch = 16, post2_ch = 16;
    bool spatial_only = false;  // ablation: zero the temporal-difference channels

    Tensor stem1_w, stem1_b;
    Tensor stem2_w, stem2_b;
    Tensor collapse_k;  // (M, frames_per_sample)
    Tensor post1_w, post1_b;
    Tensor post2_w, post2_b;
    Tensor readout_w, readout_b;  // (V, flat), (V)

    std::size_t grid_h() const { return (height + 7) / 8; }
    std::size_t grid_w() const { return (width + 7) / 8; }
    std::size_t flat_dim() const { return grid_h() * grid_w() * post2_ch; }

    std::vector<Tensor*> params() {
        return {&stem1_w, &stem1_b, &stem2_w, &stem2_b, &collapse_k, &post1_w,
                &post1_b, &post2_w, &post2_b, &readout_w, &readout_b};
    }
    std::vector<const Tensor*> params() const {
        return {&stem1_w, &stem1_b, &stem2_w, &stem2_b, &collapse_k, &post1_w,
                &post1_b, &post2_w, &post2_b, &readout_w, &readout_b};
    }
};

// Channel widths of the encoder, separable from the data dimensions so small
// test models and the full benchmark model share one code path.
struct EncoderArch {
    std::size_t stem1_ch = 8, stem2_ch = 8;
    std::size_t collapse_m = 8;
    std::size_t post1_ch = 16, post2_ch = 16;
};

inline EncoderModel make_encoder(std::size_t n_voxels, std::size_t frames_per_sample,
                                 std::size_t height, std::size_t width, std::uint64_t seed,
                                 bool spatial_only = false, const EncoderArch& arch = {}) {
    require_config(n_voxels >= 1, "encoder: need at least one voxel");
    require_config(frames_per_sample >= 2, "encoder: need at least two frames per sample");
    require_config(height % 8 == 0 && width % 8 == 0 && height >= 8 && width >= 8,
                   "encoder: frame size must be a positive multiple of 8");
    require_config(arch.stem1_ch >= 1 && arch.stem2_ch >= 1 && arch.collapse_m >= 1 &&
                       arch.post1_ch >= 1 && arch.post2_ch >= 1,
                   "encoder: channel widths must be positive");
    EncoderModel m;
    m.n_voxels = n_voxels;
    m.frames_per_sample = frames_per_sample;
    m.height = height;
    m.width = width;
    m.stem1_ch = arch.stem1_ch;
    m.stem2_ch = arch.stem2_ch;
    m.collapse_m = arch.collapse_m;
    m.post1_ch = arch.post1_ch;
    m.post2_ch = arch.post2_ch;
    m.spatial_only = spatial_only;

    auto conv_init = [](std::size_t k, std::size_t cin, std::size_t cout, Rng& rng) {
        Tensor w = Tensor::zeros({k, k, cin, cout});
        double scale = 1.0 / std::sqrt(static_cast<double>(k * k * cin));
        for (double& v : w.vec()) v = rng.normal(0.0, scale);
        return w;
    };
    Rng rng(mix_seed(seed, 0x656e63u));
    m.stem1_w = conv_init(3, 6, m.stem1_ch, rng);
    m.stem1_b = Tensor::zeros({m.stem1_ch});
    m.stem2_w = conv_init(3, m.stem1_ch, m.stem2_ch, rng);
    m.stem2_b = Tensor::zeros({m.stem2_ch});
    m.collapse_k = Tensor::zeros({m.collapse_m, frames_per_sample});
    for (double& v : m.collapse_k.vec())
        v = 1.0 / static_cast<double>(frames_per_sample) + rng.normal(0.0, 0.02);
    m.post1_w = conv_init(3, m.collapse_m * m.stem2_ch, m.post1_ch, rng);
    m.post1_b = Tensor::zeros({m.post1_ch});
    m.post2_w = conv_init(3, m.post1_ch, m.post2_ch, rng);
    m.post2_b = Tensor::zeros({m.post2_ch});
    m.readout_w = Tensor::zeros({n_voxels, m.flat_dim()});
    double rscale = 1.0 / std::sqrt(static_cast<double>(m.flat_dim()));
    for (double& v : m.readout_w.vec()) v = rng.normal(0.0, rscale);
    m.readout_b = Tensor::zeros({n_voxels});
    return m;
}

// The network input for the window starting at start_frame: each frame is
// stacked with its difference from the previous frame (zero for the first
// frame of the window). The spatial_only ablation zeroes the difference
// channels so the model sees no motion signal.
inline Tensor encoder_input(const EncoderModel& m, const Tensor& video, std::size_t start_frame) {
    require_shape(video.rank() == 4 && video.dim(3) == 3, "encoder_input: video must be (T,H,W,3)");
    require_shape(video.dim(1) == m.height && video.dim(2) == m.width,
                  "encoder_input: frame size mismatch");
    require_shape(start_frame + m.frames_per_sample <= video.dim(0),
                  "encoder_input: window out of range");
    std::size_t T = m.frames_per_sample, H = m.height, W = m.width;
    Tensor out = Tensor::zeros({T, H, W, 6});
    for (std::size_t t = 0; t < T; ++t) {
        const double* cur = video.data() + (start_frame + t) * H * W * 3;
        const double* prev = t == 0 ? cur : cur - H * W * 3;
        double* dst = out.data() + t * H * W * 6;
        for (std::size_t i = 0; i < H * W; ++i) {
            for (std::size_t c = 0; c < 3; ++c) dst[6 * i + c] = cur[3 * i + c];
            if (!m.spatial_only)
                for (std::size_t c = 0; c < 3; ++c)
                    dst[6 * i + 3 + c] = cur[3 * i + c] - prev[3 * i + c];
        }
    }
    return out;
}

// Parameter leaves in params() order.
struct EncoderLeaves {
    std::vector<Graph::Ref> refs;
};

inline EncoderLeaves encoder_leaves(Graph& g, const EncoderModel& m, bool needs_grad) {
    EncoderLeaves l;
    for (const Tensor* p : m.params()) l.refs.push_back(g.leaf(*p, needs_grad));
    return l;
}

// Forward pass from a prepared 6-channel window to the predicted vector.
inline Graph::Ref encoder_forward(Graph& g, const EncoderModel& m, const EncoderLeaves& l,
                                  Graph::Ref input) {
    require_shape(l.refs.size() == 11, "encoder_forward: wrong leaf count");
    Graph::Ref x = g.conv2d_frames(input, l.refs[0], l.refs[1], 2, true);
    x = g.relu(x);
    x = g.conv2d_frames(x, l.refs[2], l.refs[3], 2, true);
    x = g.relu(x);
    x = g.temporal_collapse(x, l.refs[4]);
    x = g.conv2d(x, l.refs[5], l.refs[6], 1, true);
    x = g.relu(x);
    x = g.conv2d(x, l.refs[7], l.refs[8], 2, true);
    x = g.relu(x);
    x = g.reshape(x, {m.flat_dim()});
    return g.dense(x, l.refs[9], l.refs[10]);
}

// Plain prediction for frozen use: one throwaway graph, no gradients.
inline Tensor encoder_predict(const EncoderModel& m, const Tensor& video,
                              std::size_t start_frame) {
    Graph g;
    EncoderLeaves l = encoder_leaves(g, m, false);
    Graph::Ref input = g.leaf(encoder_input(m, video, start_frame), false);
    return g.value(encoder_forward(g, m, l, input));
}

// Distance plus angle penalty between predicted and measured vectors:
// ||r - r_hat|| + alpha * (1 - cos(r, r_hat)). Either vector being zero
// leaves the angle undefined.
inline Graph::Ref encoder_loss_node(Graph& g, Graph::Ref pred, Graph::Ref target,
                                    double alpha = 0.5) {
    auto norm_of = [&](Graph::Ref r) {
        double acc = 0.0;
        for (double v : g.value(r).vec()) acc += v * v;
        return std::sqrt(acc);
    };
    if (norm_of(pred) < 1e-12 || norm_of(target) < 1e-12)
        throw degenerate_input_error("encoder loss: zero vector has no direction");
    Graph::Ref dist = g.l2_norm(g.sub(pred, target));
    Graph::Ref angle = g.sub(g.constant_scalar(1.0), g.cosine_similarity(pred, target));
    return g.add(dist, g.scale(angle, alpha));
}

// One training sample: a window of a stimulus video and the measurement
// vector it is paired with. Windows reference the segment tensors instead of
// copying frames.
struct ClipWindow {
    const Tensor* video = nullptr;
    std::size_t start_frame = 0;
};

struct PairedSet {
    std::vector<ClipWindow> windows;
    std::vector<std::vector<double>> targets;

    void validate(const EncoderModel& m) const {
        require_shape(windows.size() == targets.size(), "paired set: window/target mismatch");
        require_shape(!windows.empty(), "paired set: empty");
        for (const auto& t : targets)
            require_shape(t.size() == m.n_voxels, "paired set: target width mismatch");
        for (const auto& w : windows)
            require_shape(w.video != nullptr &&
                              w.start_frame + m.frames_per_sample <= w.video->dim(0),
                          "paired set: window out of range");
    }
};

struct EncoderTrainConfig {
    std::size_t epochs = 10;
    std::size_t batch = 8;
    double lr = 1e-3;
    double lr_decay = 0.2;
    std::size_t lr_step = 3;  // epochs between decays
    double alpha = 0.5;
    std::uint64_t seed = 0;
};

struct TrainHistory {
    std::vector<double> epoch_loss;
    std::size_t steps = 0;
};

// Mini-batch training with the adaptive optimizer. Batches accumulate
// sample gradients and step on the mean; sample order reshuffles per epoch
// from a seed-derived stream, so the whole run is deterministic.
inline TrainHistory train_encoder(EncoderModel& m, const PairedSet& data,
                                  const EncoderTrainConfig& cfg) {
    require_config(cfg.epochs >= 1 && cfg.batch >= 1 && cfg.lr > 0.0, "encoder train: bad config");
    data.validate(m);
    std::vector<Tensor*> params = m.params();
    AdaptiveOptimizer opt;
    TrainHistory hist;
    std::size_t n = data.windows.size();
    double lr = cfg.lr;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch > 0 && cfg.lr_step > 0 && epoch % cfg.lr_step == 0) lr *= cfg.lr_decay;
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng rng(mix_seed(cfg.seed, 0x65706f63u, epoch));
        rng.shuffle(order);

        double loss_acc = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            std::size_t stop = std::min(n, start + cfg.batch);
            std::vector<Tensor> grad_acc;
            for (Tensor* p : params) grad_acc.push_back(Tensor::zeros(p->shape()));
            double inv = 1.0 / static_cast<double>(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const ClipWindow& w = data.windows[order[i]];
                Graph g;
                EncoderLeaves leaves = encoder_leaves(g, m, true);
                Graph::Ref input = g.leaf(encoder_input(m, *w.video, w.start_frame), false);
                Graph::Ref pred = encoder_forward(g, m, leaves, input);
                Graph::Ref target =
                    g.leaf(Tensor({m.n_voxels}, data.targets[order[i]]), false);
                Graph::Ref loss = g.scale(encoder_loss_node(g, pred, target, cfg.alpha), inv);
                g.backward(loss);
                loss_acc += g.value(loss)[0] / inv;
                for (std::size_t k = 0; k < params.size(); ++k) {
                    const Tensor& gk = g.grad(leaves.refs[k]);
                    for (std::size_t j = 0; j < gk.numel(); ++j) grad_acc[k][j] += gk[j];
                }
            }
            opt.step(params, grad_acc, lr);
            ++hist.steps;
        }
        hist.epoch_loss.push_back(loss_acc / static_cast<double>(n));
    }
    return hist;
}

// Per-voxel correlation over time between predicted and measured series.
// Voxels where either series is constant get r = 0 and a degeneracy flag
// rather than poisoning downstream averages with NaN.
struct TemporalCorrelation {
    std::vector<double> r;
    std::vector<bool> degenerate;

    double mean_r() const { return r.empty() ? 0.0 : mean_of(r); }
};

inline TemporalCorrelation temporal_correlation(const Tensor& pred, const Tensor& actual) {
    require_shape(pred.rank() == 2 && actual.rank() == 2 && pred.shape() == actual.shape(),
                  "temporal_correlation: need matching (T,V)");
    std::size_t T = pred.dim(0), V = pred.dim(1);
    TemporalCorrelation out;
    out.r.resize(V, 0.0);
    out.degenerate.resize(V, false);
    std::vector<double> a(T), b(T);
    for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t t = 0; t < T; ++t) {
            a[t] = pred.at(t, v);
            b[t] = actual.at(t, v);
        }
        auto r = try_pearson(a, b);
        if (r) {
            out.r[v] = *r;
        } else {
            out.degenerate[v] = true;
        }
    }
    return out;
}

inline Checkpoint encoder_to_checkpoint(const EncoderModel& m) {
    Checkpoint ck;
    ck.meta = {{"kind", "encoder"},
               {"n_voxels", m.n_voxels},
               {"frames_per_sample", m.frames_per_sample},
               {"height", m.height},
               {"width", m.width},
               {"stem1_ch", m.stem1_ch},
               {"stem2_ch", m.stem2_ch},
               {"collapse_m", m.collapse_m},
               {"post1_ch", m.post1_ch},
               {"post2_ch", m.post2_ch},
               {"spatial_only", m.spatial_only}};
    const char* names[] = {"stem1_w", "stem1_b", "stem2_w", "stem2_b", "collapse_k", "post1_w",
                           "post1_b", "post2_w", "post2_b", "readout_w", "readout_b"};
    auto ps = m.params();
    for (std::size_t i = 0; i < ps.size(); ++i) ck.tensors.emplace_back(names[i], *ps[i]);
    return ck;
}

inline EncoderModel encoder_from_checkpoint(const Checkpoint& ck) {
    require_io(ck.meta.value("kind", "") == "encoder", "checkpoint does not hold an encoder");
    EncoderModel m;
    m.n_voxels = ck.meta.at("n_voxels").get<std::size_t>();
    m.frames_per_sample = ck.meta.at("frames_per_sample").get<std::size_t>();
    m.height = ck.meta.at("height").get<std::size_t>();
    m.width = ck.meta.at("width").get<std::size_t>();
    m.stem1_ch = ck.meta.at("stem1_ch").get<std::size_t>();
    m.stem2_ch = ck.meta.at("stem2_ch").get<std::size_t>();
    m.collapse_m = ck.meta.at("collapse_m").get<std::size_t>();
    m.post1_ch = ck.meta.at("post1_ch").get<std::size_t>();
    m.post2_ch = ck.meta.at("post2_ch").get<std::size_t>();
    m.spatial_only = ck.meta.at("spatial_only").get<bool>();
    auto ps = m.params();
    require_io(ck.tensors.size() == ps.size(), "encoder checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] = ck.tensors[i].second;
    return m;
}

}  // namespace nvrd
