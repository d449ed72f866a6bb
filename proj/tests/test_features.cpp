#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "nvrd/features.hpp"
#include "nvrd/rng.hpp"
#include "nvrd/video.hpp"

using namespace nvrd;

namespace {

Tensor scene_frame(std::uint64_t seed) {
    sim::VideoClip clip = sim::generate_video(sim::SceneSpec{}, 1.0, seed);
    Tensor frame = Tensor::zeros({32, 32, 3});
    for (std::size_t i = 0; i < frame.numel(); ++i) frame[i] = clip.frames[i];
    return frame;
}

Tensor shifted_frame(const Tensor& frame, std::size_t dx) {
    Tensor out = frame;
    std::size_t H = frame.dim(0), W = frame.dim(1);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                out.at(y, x, c) = frame.at(y, (x + dx) % W, c);
    return out;
}

double pixel_mse(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / static_cast<double>(a.numel());
}

}  // namespace

TEST_CASE("extractor weights are deterministic per seed and properly scaled") {
    FeatureStackSpec spec;
    spec.seed = 3;
    FeatureExtractor a = make_extractor(spec);
    FeatureExtractor b = make_extractor(spec);
    REQUIRE(a.weights.size() == 2);
    CHECK(a.weights[0].vec() == b.weights[0].vec());
    CHECK(a.weights[1].vec() == b.weights[1].vec());
    CHECK(a.weights[0].shape() == std::vector<std::size_t>{3, 3, 3, 8});
    CHECK(a.weights[1].shape() == std::vector<std::size_t>{3, 3, 8, 16});

    spec.seed = 4;
    FeatureExtractor c = make_extractor(spec);
    CHECK(a.weights[0].vec() != c.weights[0].vec());

    // Empirical weight scale tracks 1/sqrt(fan_in) for the second stage.
    double var = 0.0;
    for (double v : a.weights[1].vec()) var += v * v;
    var /= static_cast<double>(a.weights[1].numel());
    CHECK(var == Catch::Approx(1.0 / 72.0).epsilon(0.25));
}

TEST_CASE("extractor validates its spec") {
    FeatureStackSpec spec;
    spec.stages[0].kernel = 4;
    CHECK_THROWS_AS(make_extractor(spec), config_error);
    spec = FeatureStackSpec{};
    spec.stages.clear();
    CHECK_THROWS_AS(make_extractor(spec), config_error);
    spec = FeatureStackSpec{};
    spec.stages[0].nonlinearity = "swish";
    CHECK_THROWS_AS(make_extractor(spec), config_error);
}

TEST_CASE("stage maps have strided shapes and react to input channels") {
    FeatureExtractor ext = make_extractor(FeatureStackSpec{});
    Tensor frame = scene_frame(8);
    std::vector<Tensor> maps = feature_stages(ext, frame);
    REQUIRE(maps.size() == 2);
    CHECK(maps[0].shape() == std::vector<std::size_t>{16, 16, 8});
    CHECK(maps[1].shape() == std::vector<std::size_t>{8, 8, 16});

    FeatureStackSpec motion_spec;
    motion_spec.in_channels = 6;
    FeatureExtractor mext = make_extractor(motion_spec);
    Tensor m = motion_input(frame, scene_frame(9));
    CHECK(m.shape() == std::vector<std::size_t>{32, 32, 6});
    CHECK(feature_stages(mext, m)[0].shape() == std::vector<std::size_t>{16, 16, 8});
    CHECK_THROWS_AS(feature_stages(mext, frame), shape_error);
}

TEST_CASE("motion input carries the frame and its temporal difference") {
    Tensor a = Tensor::full({4, 4, 3}, 0.75);
    Tensor b = Tensor::full({4, 4, 3}, 0.25);
    Tensor m = motion_input(a, b);
    CHECK(m.at(1, 2, 0) == 0.75);
    CHECK(m.at(1, 2, 3) == Catch::Approx(0.5));
    Tensor still = motion_input(a, a);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x)
            for (std::size_t c = 3; c < 6; ++c) CHECK(still.at(y, x, c) == 0.0);
}

TEST_CASE("perceptual distance is a symmetric pseudometric") {
    FeatureExtractor ext = make_extractor(FeatureStackSpec{});
    Tensor a = scene_frame(1);
    Tensor b = scene_frame(2);
    CHECK(perceptual_distance(ext, a, a) == 0.0);
    double dab = perceptual_distance(ext, a, b);
    CHECK(dab > 0.0);
    CHECK(perceptual_distance(ext, b, a) == Catch::Approx(dab).margin(1e-12));
    CHECK_THROWS_AS(perceptual_distance(ext, a, Tensor::zeros({16, 16, 3})), shape_error);
}

TEST_CASE("perceptual distance increases with pixel corruption") {
    FeatureExtractor ext = make_extractor(FeatureStackSpec{});
    Rng rng(55);
    std::vector<double> dists, mses;
    for (int pair = 0; pair < 100; ++pair) {
        Tensor base = scene_frame(100 + static_cast<std::uint64_t>(pair % 10));
        double sigma = 0.005 + 0.3 * rng.uniform();
        Tensor noisy = base;
        for (double& v : noisy.vec())
            v = std::clamp(v + rng.normal(0.0, sigma), 0.0, 1.0);
        dists.push_back(perceptual_distance(ext, base, noisy));
        mses.push_back(pixel_mse(base, noisy));
    }
    CHECK(testutil::spearman(dists, mses) > 0.5);
}

TEST_CASE("a small shift stays perceptually closer than an unrelated frame") {
    FeatureExtractor ext = make_extractor(FeatureStackSpec{});
    Tensor base = scene_frame(42);
    Tensor near = shifted_frame(base, 1);
    Tensor far = scene_frame(43);
    CHECK(perceptual_distance(ext, base, near) < perceptual_distance(ext, base, far));
}

TEST_CASE("tape and plain evaluations agree and leave the stack frozen") {
    FeatureExtractor ext = make_extractor(FeatureStackSpec{});
    Tensor a = scene_frame(5);
    Tensor b = scene_frame(6);
    double plain = perceptual_distance(ext, a, b);

    Graph g;
    Graph::Ref ra = g.leaf(a, true);
    Graph::Ref rb = g.leaf(b, false);
    Graph::Ref d = perceptual_distance_node(g, ext, ra, rb);
    CHECK(g.value(d)[0] == Catch::Approx(plain).margin(1e-9));
    g.backward(d);
    const Tensor& ga = g.grad(ra);
    REQUIRE(ga.numel() == a.numel());
    double gnorm = 0.0;
    for (double v : ga.vec()) gnorm += v * v;
    CHECK(gnorm > 0.0);
}

TEST_CASE("feature loss scales stages by their size and sees gradients") {
    FeatureExtractor ext = make_extractor(FeatureStackSpec{});
    Tensor a = scene_frame(7);
    Tensor b = scene_frame(8);

    Graph g;
    Graph::Ref ra = g.leaf(a, true);
    Graph::Ref rb = g.leaf(b, false);
    Graph::Ref loss = feature_loss_node(g, ext, ra, rb);

    // Recompute the expected value from the plain stage maps.
    std::vector<Tensor> fa = feature_stages(ext, a);
    std::vector<Tensor> fb = feature_stages(ext, b);
    double want = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < fa[i].numel(); ++j) {
            double dv = fa[i][j] - fb[i][j];
            acc += dv * dv;
        }
        want += std::sqrt(acc) / std::sqrt(static_cast<double>(fa[i].numel()));
    }
    CHECK(g.value(loss)[0] == Catch::Approx(want).margin(1e-9));
    CHECK(g.value(loss)[0] > 0.0);
    CHECK(perceptual_distance(ext, a, a) == 0.0);

    // Identical inputs give zero loss.
    Graph g2;
    Graph::Ref r1 = g2.leaf(a, true);
    Graph::Ref r2 = g2.leaf(a, false);
    CHECK(g2.value(feature_loss_node(g2, ext, r1, r2))[0] == 0.0);
}
