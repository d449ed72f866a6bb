#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nvrd/autodiff.hpp"
#include "nvrd/errors.hpp"
#include "nvrd/rng.hpp"
#include "nvrd/tensor.hpp"

namespace nvrd {

// One convolutional stage of a frozen feature stack.
struct FeatureStageSpec {
    std::size_t kernel = 3;
    std::size_t channels = 8;
    std::size_t stride = 2;
    std::string nonlinearity = "relu";  // "relu" or "tanh"
};

// A frozen, randomly initialized stack of convolutions. The weights are a
// pure function of the seed; nothing here is ever trained.
struct FeatureStackSpec {
    std::uint64_t seed = 0;
    std::size_t in_channels = 3;
    std::vector<FeatureStageSpec> stages = {FeatureStageSpec{3, 8, 2, "relu"},
                                            FeatureStageSpec{3, 16, 2, "relu"}};

    void validate() const {
        require_config(in_channels >= 1, "feature stack: need at least one input channel");
        require_config(!stages.empty(), "feature stack: need at least one stage");
        for (const auto& s : stages) {
            require_config(s.kernel >= 1 && s.kernel % 2 == 1,
                           "feature stack: kernels must be odd");
            require_config(s.channels >= 1 && s.stride >= 1, "feature stack: bad stage");
            require_config(s.nonlinearity == "relu" || s.nonlinearity == "tanh",
                           "feature stack: unknown nonlinearity");
        }
    }
};

struct FeatureExtractor {
    FeatureStackSpec spec;
    std::vector<Tensor> weights;  // (K,K,Cin,Cout) per stage, no biases
};

// Weights are N(0, 1/sqrt(fan_in)) with fan_in = K*K*Cin, drawn from a
// stream keyed by (seed, stage), so adding stages never reshuffles the
// earlier ones.
inline FeatureExtractor make_extractor(const FeatureStackSpec& spec) {
    spec.validate();
    FeatureExtractor ext;
    ext.spec = spec;
    std::size_t cin = spec.in_channels;
    for (std::size_t i = 0; i < spec.stages.size(); ++i) {
        const auto& st = spec.stages[i];
        Rng rng(mix_seed(spec.seed, 0x66656174u, static_cast<std::uint64_t>(i)));
        Tensor w = Tensor::zeros({st.kernel, st.kernel, cin, st.channels});
        double scale = 1.0 / std::sqrt(static_cast<double>(st.kernel * st.kernel * cin));
        for (double& v : w.vec()) v = rng.normal(0.0, scale);
        ext.weights.push_back(std::move(w));
        cin = st.channels;
    }
    return ext;
}

// Tape version of the stack: weights enter as frozen leaves, so gradients
// flow to the image but never to the extractor.
inline std::vector<Graph::Ref> feature_stages(Graph& g, const FeatureExtractor& ext,
                                              Graph::Ref image) {
    require_shape(g.value(image).rank() == 3, "feature_stages: image must be (H,W,C)");
    require_shape(g.value(image).dim(2) == ext.spec.in_channels,
                  "feature_stages: channel mismatch");
    std::vector<Graph::Ref> out;
    Graph::Ref x = image;
    for (std::size_t i = 0; i < ext.weights.size(); ++i) {
        Graph::Ref w = g.leaf(ext.weights[i], false);
        x = g.conv2d(x, w, -1, ext.spec.stages[i].stride, true);
        x = ext.spec.stages[i].nonlinearity == "relu" ? g.relu(x) : g.tanh_act(x);
        out.push_back(x);
    }
    return out;
}

// Plain forward pass for metric evaluation.
inline std::vector<Tensor> feature_stages(const FeatureExtractor& ext, const Tensor& image) {
    Graph g;
    Graph::Ref leaf = g.leaf(image, false);
    std::vector<Graph::Ref> refs = feature_stages(g, ext, leaf);
    std::vector<Tensor> out;
    out.reserve(refs.size());
    for (Graph::Ref r : refs) out.push_back(g.value(r));
    return out;
}

// Motion input: the frame stacked with a temporal difference, 6 channels.
inline Tensor motion_input(const Tensor& frame, const Tensor& prev_frame) {
    require_shape(frame.rank() == 3 && frame.shape() == prev_frame.shape(),
                  "motion_input: frames must share (H,W,C)");
    std::size_t H = frame.dim(0), W = frame.dim(1), C = frame.dim(2);
    Tensor out = Tensor::zeros({H, W, 2 * C});
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < C; ++c) {
                out.at(y, x, c) = frame.at(y, x, c);
                out.at(y, x, C + c) = frame.at(y, x, c) - prev_frame.at(y, x, c);
            }
    return out;
}

namespace detail {

inline double stage_distance(const Tensor& a, const Tensor& b) {
    double na = 0.0, nb = 0.0;
    for (double v : a.vec()) na += v * v;
    for (double v : b.vec()) nb += v * v;
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    double ia = na < 1e-12 ? 0.0 : 1.0 / na;
    double ib = nb < 1e-12 ? 0.0 : 1.0 / nb;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        double d = a[i] * ia - b[i] * ib;
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace detail

// Distance between two images in the frozen feature space: each stage map is
// normalized to unit length, and the stage-wise Euclidean gaps are summed.
// Zero iff the stage activations coincide; symmetric by construction.
inline double perceptual_distance(const FeatureExtractor& ext, const Tensor& a, const Tensor& b) {
    require_shape(a.shape() == b.shape(), "perceptual_distance: shape mismatch");
    std::vector<Tensor> fa = feature_stages(ext, a);
    std::vector<Tensor> fb = feature_stages(ext, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) acc += detail::stage_distance(fa[i], fb[i]);
    return acc;
}

// Tape version of the same metric, for losses that need gradients.
inline Graph::Ref perceptual_distance_node(Graph& g, const FeatureExtractor& ext, Graph::Ref a,
                                           Graph::Ref b) {
    std::vector<Graph::Ref> fa = feature_stages(g, ext, a);
    std::vector<Graph::Ref> fb = feature_stages(g, ext, b);
    Graph::Ref total = g.constant_scalar(0.0);
    for (std::size_t i = 0; i < fa.size(); ++i) {
        Graph::Ref d = g.sub(g.unit_normalize(fa[i]), g.unit_normalize(fb[i]));
        total = g.add(total, g.l2_norm(d));
    }
    return total;
}

// Training loss between two feature stacks: unnormalized stage maps, each
// stage's Euclidean gap scaled by 1/sqrt(stage size) so stages with more
// cells do not dominate.
inline Graph::Ref feature_loss_node(Graph& g, const FeatureExtractor& ext, Graph::Ref a,
                                    Graph::Ref b) {
    std::vector<Graph::Ref> fa = feature_stages(g, ext, a);
    std::vector<Graph::Ref> fb = feature_stages(g, ext, b);
    Graph::Ref total = g.constant_scalar(0.0);
    for (std::size_t i = 0; i < fa.size(); ++i) {
        double inv = 1.0 / std::sqrt(static_cast<double>(g.value(fa[i]).numel()));
        total = g.add(total, g.scale(g.l2_norm(g.sub(fa[i], fb[i])), inv));
    }
    return total;
}

}  // namespace nvrd
