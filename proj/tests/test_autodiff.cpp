#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "nvrd/autodiff.hpp"

using nvrd::Graph;
using nvrd::Rng;
using nvrd::Tensor;
using testutil::grad_check;
using testutil::random_tensor;

namespace {

constexpr double kGradTol = 1e-6;

// Random values bounded away from zero, for ops with a kink at the origin.
Tensor random_signed_away_from_zero(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) {
        double mag = rng.uniform(0.1, 1.0);
        t[i] = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

}  // namespace

TEST_CASE("elementwise op gradients match central differences") {
    Rng rng(101);
    std::vector<Tensor> params{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)};
    // keep the divisor away from zero
    for (std::size_t i = 0; i < params[1].numel(); ++i) {
        params[1][i] = (params[1][i] < 0 ? -1.0 : 1.0) * (0.5 + std::fabs(params[1][i]));
    }
    Tensor cot = random_tensor({3, 4}, rng);

    auto builds = std::vector<testutil::LossBuilder>{
        [&](Graph& g, const std::vector<Graph::Ref>& L) {
            return g.sum(g.mul(g.add(L[0], L[1]), g.leaf(cot)));
        },
        [&](Graph& g, const std::vector<Graph::Ref>& L) {
            return g.sum(g.mul(g.sub(L[0], L[1]), g.leaf(cot)));
        },
        [&](Graph& g, const std::vector<Graph::Ref>& L) {
            return g.sum(g.mul(g.mul(L[0], L[1]), g.leaf(cot)));
        },
        [&](Graph& g, const std::vector<Graph::Ref>& L) {
            return g.sum(g.mul(g.div(L[0], L[1]), g.leaf(cot)));
        },
        [&](Graph& g, const std::vector<Graph::Ref>& L) {
            return g.sum(g.mul(g.square(g.scale(L[0], 1.7)), g.leaf(cot)));
        },
        [&](Graph& g, const std::vector<Graph::Ref>& L) {
            return g.sum(g.mul(g.tanh_act(g.add_scalar(L[0], 0.3)), g.leaf(cot)));
        },
        [&](Graph& g, const std::vector<Graph::Ref>& L) {
            return g.sum(g.mul(g.sigmoid(L[0]), g.leaf(cot)));
        },
    };
    for (auto& b : builds) {
        auto res = grad_check(params, b);
        INFO("checked " << res.checked);
        REQUIRE(res.max_rel_err < kGradTol);
    }
}

TEST_CASE("kinked op gradients away from the kink") {
    Rng rng(202);
    std::vector<Tensor> params{random_signed_away_from_zero({4, 5}, rng)};
    Tensor cot = random_tensor({4, 5}, rng);

    auto relu_loss = [&](Graph& g, const std::vector<Graph::Ref>& L) {
        return g.sum(g.mul(g.relu(L[0]), g.leaf(cot)));
    };
    REQUIRE(grad_check(params, relu_loss).max_rel_err < kGradTol);

    auto abs_loss = [&](Graph& g, const std::vector<Graph::Ref>& L) {
        return g.sum(g.mul(g.smooth_abs(L[0]), g.leaf(cot)));
    };
    REQUIRE(grad_check(params, abs_loss).max_rel_err < kGradTol);
}

TEST_CASE("reduction and norm gradients match central differences") {
    Rng rng(303);
    std::vector<Tensor> params{random_tensor({6}, rng), random_tensor({6}, rng)};

    auto checks = std::vector<testutil::LossBuilder>{
        [](Graph& g, const std::vector<Graph::Ref>& L) { return g.mean(g.square(L[0])); },
        [](Graph& g, const std::vector<Graph::Ref>& L) { return g.dot(L[0], L[1]); },
        [](Graph& g, const std::vector<Graph::Ref>& L) { return g.l2_norm(L[0]); },
        [](Graph& g, const std::vector<Graph::Ref>& L) { return g.l1_norm(g.add_scalar(L[0], 2.5)); },
        [](Graph& g, const std::vector<Graph::Ref>& L) { return g.cosine_similarity(L[0], L[1]); },
    };
    for (auto& b : checks) REQUIRE(grad_check(params, b).max_rel_err < kGradTol);
}

TEST_CASE("cosine similarity hand values") {
    Graph g;
    auto a = g.leaf(Tensor({2}, {1.0, 0.0}));
    auto b = g.leaf(Tensor({2}, {0.0, 1.0}));
    REQUIRE(g.value(g.cosine_similarity(a, b))[0] == Catch::Approx(0.0).margin(1e-9));
    auto c = g.leaf(Tensor({2}, {1.0, 2.0}));
    auto d = g.leaf(Tensor({2}, {2.0, 4.0}));
    REQUIRE(g.value(g.cosine_similarity(c, d))[0] == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("dense layer gradients and values") {
    Rng rng(404);
    std::vector<Tensor> params{random_tensor({5}, rng), random_tensor({3, 5}, rng),
                               random_tensor({3}, rng)};
    Tensor cot = random_tensor({3}, rng);
    auto loss = [&](Graph& g, const std::vector<Graph::Ref>& L) {
        return g.sum(g.mul(g.dense(L[0], L[1], L[2]), g.leaf(cot)));
    };
    REQUIRE(grad_check(params, loss).max_rel_err < kGradTol);

    Graph g;
    auto x = g.leaf(Tensor({2}, {1.0, 2.0}));
    auto W = g.leaf(Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}));
    auto b = g.leaf(Tensor({2}, {0.5, -0.5}));
    auto y = g.dense(x, W, b);
    REQUIRE(g.value(y)[0] == Catch::Approx(1.5));
    REQUIRE(g.value(y)[1] == Catch::Approx(1.5));
}

TEST_CASE("conv2d matches an independent padded reference") {
    Rng rng(505);
    for (bool same_pad : {true, false}) {
        for (std::size_t stride : {std::size_t{1}, std::size_t{2}}) {
            Tensor x = random_tensor({7, 6, 3}, rng);
            Tensor w = random_tensor({3, 3, 3, 4}, rng);
            Tensor b = random_tensor({4}, rng);
            Graph g;
            auto out = g.conv2d(g.leaf(x), g.leaf(w), g.leaf(b), stride, same_pad);
            Tensor ref = testutil::reference_conv2d(x, w, &b, stride, same_pad);
            REQUIRE(g.value(out).shape() == ref.shape());
            for (std::size_t i = 0; i < ref.numel(); ++i) {
                REQUIRE(g.value(out)[i] == Catch::Approx(ref[i]).margin(1e-12));
            }
        }
    }
}

TEST_CASE("conv2d gradients match central differences") {
    Rng rng(606);
    for (bool same_pad : {true, false}) {
        std::vector<Tensor> params{random_tensor({5, 5, 2}, rng), random_tensor({3, 3, 2, 3}, rng),
                                   random_tensor({3}, rng)};
        Tensor cot;
        auto loss = [&](Graph& g, const std::vector<Graph::Ref>& L) {
            auto out = g.conv2d(L[0], L[1], L[2], 2, same_pad);
            if (cot.numel() == 0) {
                Rng r2(99);
                cot = random_tensor(g.value(out).shape(), r2);
            }
            return g.sum(g.mul(out, g.leaf(cot)));
        };
        REQUIRE(grad_check(params, loss).max_rel_err < kGradTol);
        cot = Tensor();
    }
}

TEST_CASE("conv2d_frames equals conv2d applied per frame") {
    Rng rng(707);
    Tensor clip = random_tensor({3, 6, 6, 2}, rng);
    Tensor w = random_tensor({3, 3, 2, 4}, rng);
    Tensor b = random_tensor({4}, rng);
    Graph g;
    auto out = g.conv2d_frames(g.leaf(clip), g.leaf(w), g.leaf(b), 2, true);
    for (std::size_t t = 0; t < 3; ++t) {
        Graph g2;
        auto ft = g2.slice_frame(g2.leaf(clip), t);
        auto per = g2.conv2d(ft, g2.leaf(w), g2.leaf(b), 2, true);
        const Tensor& vo = g.value(out);
        const Tensor& vp = g2.value(per);
        std::size_t stride = vp.numel();
        for (std::size_t i = 0; i < stride; ++i) {
            REQUIRE(vo[t * stride + i] == Catch::Approx(vp[i]).margin(1e-12));
        }
    }

    std::vector<Tensor> params{clip, w, b};
    Tensor cot;
    auto loss = [&](Graph& gg, const std::vector<Graph::Ref>& L) {
        auto o = gg.conv2d_frames(L[0], L[1], L[2], 2, true);
        if (cot.numel() == 0) {
            Rng r2(98);
            cot = random_tensor(gg.value(o).shape(), r2);
        }
        return gg.sum(gg.mul(o, gg.leaf(cot)));
    };
    REQUIRE(grad_check(params, loss).max_rel_err < kGradTol);
}

TEST_CASE("conv1d_time values and gradients") {
    // hand case: T=3, KT=2, 1 pixel, 1 channel in and out
    Graph g;
    auto x = g.leaf(Tensor({3, 1, 1, 1}, {1.0, 2.0, 3.0}));
    auto w = g.leaf(Tensor({2, 1, 1}, {10.0, 1.0}));
    auto out = g.conv1d_time(x, w);
    REQUIRE(g.value(out).shape() == std::vector<std::size_t>{2, 1, 1, 1});
    REQUIRE(g.value(out)[0] == Catch::Approx(12.0));  // 10*1 + 1*2
    REQUIRE(g.value(out)[1] == Catch::Approx(23.0));  // 10*2 + 1*3

    Rng rng(808);
    std::vector<Tensor> params{random_tensor({6, 3, 3, 2}, rng), random_tensor({5, 2, 3}, rng)};
    Tensor cot;
    auto loss = [&](Graph& gg, const std::vector<Graph::Ref>& L) {
        auto o = gg.conv1d_time(L[0], L[1]);
        if (cot.numel() == 0) {
            Rng r2(97);
            cot = random_tensor(gg.value(o).shape(), r2);
        }
        return gg.sum(gg.mul(o, gg.leaf(cot)));
    };
    REQUIRE(grad_check(params, loss).max_rel_err < kGradTol);
}

TEST_CASE("temporal_collapse one-hot kernels select frames and uniform kernels average") {
    Rng rng(909);
    Tensor clip = random_tensor({8, 4, 4, 6}, rng);

    Tensor onehot({8, 8});
    for (std::size_t m = 0; m < 8; ++m) onehot.at(m, m) = 1.0;
    Graph g;
    auto out = g.temporal_collapse(g.leaf(clip), g.leaf(onehot));
    REQUIRE(g.value(out).shape() == std::vector<std::size_t>{4, 4, 48});
    // kernel m selects frame m for channel block m
    for (std::size_t m = 0; m < 8; ++m)
        for (std::size_t h = 0; h < 4; ++h)
            for (std::size_t w = 0; w < 4; ++w)
                for (std::size_t c = 0; c < 6; ++c) {
                    REQUIRE(g.value(out).at(h, w, m * 6 + c) ==
                            Catch::Approx(clip.at(m, h, w, c)).margin(1e-12));
                }

    Tensor uniform = Tensor::full({1, 8}, 1.0 / 8.0);
    Graph g2;
    auto avg = g2.temporal_collapse(g2.leaf(clip), g2.leaf(uniform));
    for (std::size_t h = 0; h < 4; ++h)
        for (std::size_t w = 0; w < 4; ++w)
            for (std::size_t c = 0; c < 6; ++c) {
                double m = 0.0;
                for (std::size_t t = 0; t < 8; ++t) m += clip.at(t, h, w, c);
                m /= 8.0;
                REQUIRE(g2.value(avg).at(h, w, c) == Catch::Approx(m).margin(1e-12));
            }
}

TEST_CASE("temporal_collapse gradients match central differences") {
    Rng rng(111);
    std::vector<Tensor> params{random_tensor({4, 3, 3, 2}, rng), random_tensor({3, 4}, rng)};
    Tensor cot;
    auto loss = [&](Graph& g, const std::vector<Graph::Ref>& L) {
        auto o = g.temporal_collapse(L[0], L[1]);
        if (cot.numel() == 0) {
            Rng r2(96);
            cot = random_tensor(g.value(o).shape(), r2);
        }
        return g.sum(g.mul(o, g.leaf(cot)));
    };
    REQUIRE(grad_check(params, loss).max_rel_err < kGradTol);
    REQUIRE_THROWS_AS(
        [&] {
            Graph g;
            g.temporal_collapse(g.leaf(Tensor({4, 3, 3, 2})), g.leaf(Tensor({3, 5})));
        }(),
        nvrd::shape_error);
}

TEST_CASE("shape ops propagate gradients exactly") {
    Rng rng(212);
    std::vector<Tensor> params{random_tensor({2, 4, 4, 3}, rng), random_tensor({2, 4, 4, 2}, rng)};
    Tensor cot;
    auto loss = [&](Graph& g, const std::vector<Graph::Ref>& L) {
        auto cc = g.concat_last(L[0], L[1]);      // (2,4,4,5)
        auto f0 = g.slice_frame(cc, 0);           // (4,4,5)
        auto f1 = g.slice_frame(cc, 1);
        auto st = g.stack_frames({f1, f0});       // (2,4,4,5)
        auto cr = g.crop(g.slice_frame(st, 0), 1, 1, 2, 2);
        auto rs = g.reshape(cr, {static_cast<std::size_t>(2 * 2 * 5)});
        if (cot.numel() == 0) {
            Rng r2(95);
            cot = random_tensor({static_cast<std::size_t>(2 * 2 * 5)}, r2);
        }
        return g.sum(g.mul(rs, g.leaf(cot)));
    };
    REQUIRE(grad_check(params, loss).max_rel_err < kGradTol);
}

TEST_CASE("resampling ops: values and gradients") {
    Graph g;
    auto x = g.leaf(Tensor({2, 2, 1}, {1.0, 2.0, 3.0, 4.0}));
    auto up = g.upsample2x(x);
    REQUIRE(g.value(up).shape() == std::vector<std::size_t>{4, 4, 1});
    REQUIRE(g.value(up).at(0, 1, 0) == 1.0);
    REQUIRE(g.value(up).at(3, 3, 0) == 4.0);

    Rng rng(313);
    {
        std::vector<Tensor> params{random_tensor({3, 3, 2}, rng)};
        Tensor cot;
        auto loss = [&](Graph& gg, const std::vector<Graph::Ref>& L) {
            auto o = gg.upsample2x(L[0]);
            if (cot.numel() == 0) {
                Rng r2(94);
                cot = random_tensor(gg.value(o).shape(), r2);
            }
            return gg.sum(gg.mul(o, gg.leaf(cot)));
        };
        REQUIRE(grad_check(params, loss).max_rel_err < kGradTol);
    }
    {
        std::vector<Tensor> params{random_tensor({2, 4, 4, 3}, rng)};
        Tensor cot;
        auto loss = [&](Graph& gg, const std::vector<Graph::Ref>& L) {
            auto o = gg.resize_frames_nearest(L[0], 7, 7);
            if (cot.numel() == 0) {
                Rng r2(93);
                cot = random_tensor(gg.value(o).shape(), r2);
            }
            return gg.sum(gg.mul(o, gg.leaf(cot)));
        };
        REQUIRE(grad_check(params, loss).max_rel_err < kGradTol);
    }
}

TEST_CASE("maxpool and temporal mean: values and gradients") {
    Graph g;
    Tensor clip({1, 2, 2, 1}, {1.0, 5.0, 3.0, 2.0});
    auto mp = g.maxpool2x_frames(g.leaf(clip));
    REQUIRE(g.value(mp).numel() == 1);
    REQUIRE(g.value(mp)[0] == 5.0);

    // distinct values with comfortable gaps keep the finite differences clean
    Tensor big({2, 4, 4, 2});
    for (std::size_t i = 0; i < big.numel(); ++i) big[i] = static_cast<double>((i * 7919) % 64) / 4.0;
    std::vector<Tensor> params{big};
    Tensor cot;
    auto loss = [&](Graph& gg, const std::vector<Graph::Ref>& L) {
        auto o = gg.mean_time(gg.maxpool2x_frames(L[0]));
        if (cot.numel() == 0) {
            Rng r2(92);
            cot = random_tensor(gg.value(o).shape(), r2);
        }
        return gg.sum(gg.mul(o, gg.leaf(cot)));
    };
    REQUIRE(grad_check(params, loss).max_rel_err < kGradTol);
}

TEST_CASE("total variation: flat frames score ~zero, edges count") {
    Graph g;
    auto flat = g.leaf(Tensor::full({4, 4, 3}, 0.7));
    REQUIRE(g.value(g.total_variation(flat))[0] < 1e-5);

    // single vertical step of height 1 in a 2x2 single-channel frame
    auto step = g.leaf(Tensor({2, 2, 1}, {0.0, 1.0, 0.0, 1.0}));
    // pairs: vertical diffs 0,0; horizontal diffs 1,1 -> mean over 4 pairs = 0.5
    REQUIRE(g.value(g.total_variation(step))[0] == Catch::Approx(0.5).margin(1e-4));

    Rng rng(414);
    std::vector<Tensor> params{random_tensor({5, 5, 2}, rng)};
    auto loss = [&](Graph& gg, const std::vector<Graph::Ref>& L) {
        return gg.total_variation(L[0]);
    };
    REQUIRE(grad_check(params, loss).max_rel_err < 1e-5);
}

TEST_CASE("group lasso over rows: value and gradient") {
    Graph g;
    auto W = g.leaf(Tensor({2, 2}, {3.0, 4.0, 0.0, 0.0}));
    // row norms 5 and ~0, mean ~2.5
    REQUIRE(g.value(g.group_lasso_rows(W))[0] == Catch::Approx(2.5).margin(1e-6));

    Rng rng(515);
    std::vector<Tensor> params{random_signed_away_from_zero({4, 6}, rng)};
    auto loss = [&](Graph& gg, const std::vector<Graph::Ref>& L) {
        return gg.group_lasso_rows(L[0]);
    };
    REQUIRE(grad_check(params, loss).max_rel_err < kGradTol);
}

TEST_CASE("logistic loss: values, stability, and gradient") {
    Graph g;
    // sigmoid(0) = 0.5 against target 0: -log(0.5) = log 2
    auto z0 = g.leaf(Tensor({1}, {0.0}));
    REQUIRE(g.value(g.logistic_loss(z0, 0.0))[0] == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    // confident and correct: tiny loss; confident and wrong: ~|z|
    auto zbig = g.leaf(Tensor({1}, {40.0}));
    REQUIRE(g.value(g.logistic_loss(zbig, 1.0))[0] < 1e-15);
    REQUIRE(g.value(g.logistic_loss(zbig, 0.0))[0] == Catch::Approx(40.0).margin(1e-12));
    // extreme logits stay finite (the naive log(sigmoid) underflows here)
    auto zhuge = g.leaf(Tensor({2}, {800.0, -800.0}));
    REQUIRE(std::isfinite(g.value(g.logistic_loss(zhuge, 0.5))[0]));
    // symmetry: loss(z, t) == loss(-z, 1-t)
    auto zp = g.leaf(Tensor({1}, {1.3}));
    auto zm = g.leaf(Tensor({1}, {-1.3}));
    REQUIRE(g.value(g.logistic_loss(zp, 0.2))[0] ==
            Catch::Approx(g.value(g.logistic_loss(zm, 0.8))[0]).epsilon(1e-12));

    Rng rng(717);
    std::vector<Tensor> params{random_tensor({6}, rng, -2.0, 2.0)};
    for (double target : {0.0, 0.3, 1.0}) {
        auto loss = [&](Graph& gg, const std::vector<Graph::Ref>& L) {
            return gg.logistic_loss(L[0], target);
        };
        REQUIRE(grad_check(params, loss).max_rel_err < kGradTol);
    }
}

TEST_CASE("unit normalization produces unit vectors and keeps zero at zero") {
    Graph g;
    Rng rng(616);
    auto x = g.leaf(random_tensor({7}, rng));
    auto n = g.unit_normalize(x);
    double ss = 0.0;
    for (std::size_t i = 0; i < 7; ++i) ss += g.value(n)[i] * g.value(n)[i];
    REQUIRE(std::sqrt(ss) == Catch::Approx(1.0).epsilon(1e-9));

    auto z = g.leaf(Tensor::zeros({5}));
    auto nz = g.unit_normalize(z);
    for (std::size_t i = 0; i < 5; ++i) REQUIRE(g.value(nz)[i] == 0.0);
}

TEST_CASE("cycle losses through constant branches leave constants gradient-free") {
    // a leaf without needs_grad never accumulates gradient
    Graph g;
    auto p = g.leaf(Tensor({3}, {1.0, 2.0, 3.0}), true);
    auto frozen = g.leaf(Tensor({3}, {0.5, 0.5, 0.5}), false);
    auto loss = g.sum(g.square(g.sub(p, frozen)));
    g.backward(loss);
    REQUIRE(g.grad(p).numel() == 3);
    REQUIRE(g.grad(frozen).numel() == 0);
}

TEST_CASE("adaptive optimizer reduces a quadratic and is deterministic") {
    auto run = [] {
        Tensor p({3}, {5.0, -4.0, 2.0});
        nvrd::AdaptiveOptimizer opt;
        for (int step = 0; step < 200; ++step) {
            Graph g;
            auto ref = g.leaf(p, true);
            auto loss = g.sum(g.square(ref));
            g.backward(loss);
            std::vector<Tensor*> params{&p};
            std::vector<Tensor> grads{g.grad(ref)};
            opt.step(params, grads, 0.05);
        }
        return p;
    };
    Tensor a = run(), b = run();
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(std::fabs(a[i]) < 0.5);
        REQUIRE(a[i] == b[i]);
    }
}
