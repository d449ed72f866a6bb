#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "nvrd/preprocess.hpp"
#include "nvrd/rng.hpp"
#include "nvrd/stats.hpp"
#include "nvrd/subject.hpp"
#include "nvrd/video.hpp"

using namespace nvrd;

TEST_CASE("pearson correlation hand values") {
    std::vector<double> x = {1.0, 2.0, 3.0};
    std::vector<double> y = {1.0, 2.0, 4.0};
    // Centered sums: sxy = 3, sxx = 2, syy = 14/3.
    double want = 3.0 / std::sqrt(2.0 * 14.0 / 3.0);
    CHECK(pearson(x, y) == Catch::Approx(want).margin(1e-12));

    std::vector<double> z = {3.0, 5.0, 7.0};  // z = 2x + 1
    CHECK(pearson(x, z) == Catch::Approx(1.0).margin(1e-12));
    std::vector<double> w = {-1.0, -2.0, -3.0};
    CHECK(pearson(x, w) == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("pearson rejects degenerate and malformed input") {
    std::vector<double> x = {1.0, 2.0, 3.0};
    std::vector<double> c = {4.0, 4.0, 4.0};
    CHECK_THROWS_AS(pearson(x, c), degenerate_input_error);
    CHECK_THROWS_AS(pearson(c, x), degenerate_input_error);
    CHECK_FALSE(try_pearson(x, c).has_value());
    CHECK(try_pearson(x, x).has_value());
    std::vector<double> shorter = {1.0, 2.0};
    CHECK_THROWS_AS(pearson(x, shorter), shape_error);
    std::vector<double> one = {1.0};
    CHECK_THROWS_AS(pearson(one, one), shape_error);
}

TEST_CASE("midranks and rank correlation") {
    std::vector<double> x = {3.0, 1.0, 4.0, 1.0, 5.0};
    std::vector<double> want = {3.0, 1.5, 4.0, 1.5, 5.0};
    CHECK(midranks(x) == want);

    // Cross-check against the test-side implementation on random data.
    Rng rng(31);
    std::vector<double> a(60), b(60);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = std::floor(rng.uniform(0.0, 10.0));  // coarse values force ties
        b[i] = a[i] * a[i] * a[i] + rng.normal();
    }
    std::vector<double> lib = midranks(a);
    std::vector<double> ref = testutil::midranks(a);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(lib[i] == Catch::Approx(ref[i]));
    CHECK(spearman(a, b) == Catch::Approx(testutil::spearman(a, b)).margin(1e-12));

    // A monotone transform leaves rank correlation at one.
    std::vector<double> xs = {0.5, 1.5, 2.0, 3.5, 7.0};
    std::vector<double> cubes(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) cubes[i] = xs[i] * xs[i] * xs[i];
    CHECK(spearman(xs, cubes) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("moment helpers agree with the test-side oracles") {
    Rng rng(77);
    std::vector<double> x(40);
    for (double& v : x) v = rng.normal(2.0, 3.0);
    CHECK(mean_of(x) == Catch::Approx(testutil::mean_of(x)).margin(1e-12));
    CHECK(sample_variance(x) == Catch::Approx(testutil::sample_variance(x)).margin(1e-12));
}

TEST_CASE("alignment recovers the acquisition delay from noiseless data") {
    sim::VideoClip clip = sim::generate_video(sim::SceneSpec{}, 240.0, 9);
    Tensor feats = sim::tr_stimulus_features(clip, 2.0);
    for (std::size_t d : {0u, 2u, 4u}) {
        sim::VirtualSubject subject = sim::make_virtual_subject(32, 3, 0.0, d);
        Tensor fmri = sim::simulate_noiseless(subject, clip);
        AlignmentResult res = find_temporal_alignment(fmri, feats, subject.hrf);
        INFO("delay " << d);
        CHECK(res.best_shift == static_cast<int>(d));
    }
}

TEST_CASE("alignment tolerates measurement noise") {
    sim::VideoClip clip = sim::generate_video(sim::SceneSpec{}, 240.0, 9);
    Tensor feats = sim::tr_stimulus_features(clip, 2.0);
    sim::VirtualSubject subject = sim::make_virtual_subject(48, 3, 0.3, 2);
    Tensor fmri = sim::simulate_fmri(subject, clip, 0, 0).samples;
    AlignmentResult res = find_temporal_alignment(fmri, feats, subject.hrf);
    CHECK(res.best_shift == 2);
    CHECK(res.shifts.size() == 7);
    CHECK(res.skipped_shifts.empty());
}

TEST_CASE("alignment skips lags with too little overlap") {
    Rng rng(5);
    Tensor fmri = Tensor::zeros({6, 2});
    Tensor feats = Tensor::zeros({6, 3});
    for (double& v : fmri.vec()) v = rng.normal();
    for (double& v : feats.vec()) v = rng.normal();
    sim::HrfKernel hrf = sim::canonical_hrf(2.0);
    AlignmentResult res = find_temporal_alignment(fmri, feats, hrf);
    CHECK(res.skipped_shifts == std::vector<int>{3, 4, 5});
    CHECK(res.shifts == std::vector<int>{-1, 0, 1, 2});

    Tensor tiny_f = Tensor::zeros({3, 2});
    Tensor tiny_s = Tensor::zeros({3, 3});
    for (double& v : tiny_f.vec()) v = rng.normal();
    for (double& v : tiny_s.vec()) v = rng.normal();
    CHECK_THROWS_AS(find_temporal_alignment(tiny_f, tiny_s, hrf), degenerate_input_error);
}

TEST_CASE("reproducibility scores") {
    Rng rng(13);
    Tensor base = Tensor::zeros({200, 3});
    for (double& v : base.vec()) v = rng.normal();
    // Voxel 2 is constant in every repeat.
    for (std::size_t t = 0; t < 200; ++t) base.at(t, 2) = 1.5;

    SECTION("identical repeats score one, constant voxels score zero") {
        std::vector<Tensor> reps = {base, base, base};
        std::vector<double> scores = reproducibility_scores(reps);
        CHECK(scores[0] == Catch::Approx(1.0));
        CHECK(scores[1] == Catch::Approx(1.0));
        CHECK(scores[2] == 0.0);
    }

    SECTION("independent noise scores near zero") {
        std::vector<Tensor> reps;
        for (int r = 0; r < 3; ++r) {
            Tensor t = Tensor::zeros({200, 3});
            for (double& v : t.vec()) v = rng.normal();
            reps.push_back(t);
        }
        std::vector<double> scores = reproducibility_scores(reps);
        for (double s : scores) CHECK(std::fabs(s) < 0.25);
    }

    SECTION("shape checks") {
        std::vector<Tensor> one = {base};
        CHECK_THROWS_AS(reproducibility_scores(one), shape_error);
        std::vector<Tensor> mismatched = {base, Tensor::zeros({100, 3})};
        CHECK_THROWS_AS(reproducibility_scores(mismatched), shape_error);
    }
}

TEST_CASE("voxel signal-to-noise hand computation") {
    // Two voxels, three repeats, four samples; expected values recomputed
    // from the definition with the test-side moment helpers.
    std::vector<Tensor> reps;
    Rng rng(21);
    for (int r = 0; r < 3; ++r) {
        Tensor t = Tensor::zeros({4, 2});
        for (double& v : t.vec()) v = rng.uniform(0.0, 2.0);
        reps.push_back(t);
    }
    std::vector<double> snr = voxel_snr(reps);
    for (std::size_t v = 0; v < 2; ++v) {
        std::vector<double> means;
        double noise = 0.0;
        for (std::size_t t = 0; t < 4; ++t) {
            std::vector<double> xs;
            for (const Tensor& r : reps) xs.push_back(r.at(t, v));
            means.push_back(testutil::mean_of(xs));
            noise += testutil::sample_variance(xs);
        }
        double want = testutil::sample_variance(means) / (noise / 4.0);
        CHECK(snr[v] == Catch::Approx(want).margin(1e-12));
    }
}

TEST_CASE("voxel signal-to-noise caps noiseless voxels and tracks the ratio") {
    Rng rng(41);
    Tensor clean = Tensor::zeros({50, 1});
    for (double& v : clean.vec()) v = rng.normal();
    std::vector<double> capped = voxel_snr({clean, clean, clean});
    CHECK(capped[0] == 1e6);

    // Monte Carlo: unit-variance signal with sigma = 0.5 noise across 40
    // repeats gives a ratio close to (1 + sigma^2/k) / sigma^2.
    std::size_t T = 300, k = 40;
    std::vector<double> signal(T);
    for (double& v : signal) v = rng.normal();
    std::vector<Tensor> reps;
    for (std::size_t r = 0; r < k; ++r) {
        Tensor t = Tensor::zeros({T, 1});
        for (std::size_t i = 0; i < T; ++i) t.at(i, 0) = signal[i] + 0.5 * rng.normal();
        reps.push_back(t);
    }
    double got = voxel_snr(reps)[0];
    CHECK(got == Catch::Approx(4.0).epsilon(0.15));
}

TEST_CASE("noise ceiling") {
    Rng rng(61);

    SECTION("identical repeats reach the ceiling of one") {
        Tensor base = Tensor::zeros({80, 2});
        for (double& v : base.vec()) v = rng.normal();
        std::vector<double> ceil = noise_ceiling({base, base});
        CHECK(ceil[0] == Catch::Approx(1.0));
        CHECK(ceil[1] == Catch::Approx(1.0));
    }

    SECTION("single repeat is rejected") {
        std::vector<Tensor> one = {Tensor::zeros({80, 2})};
        CHECK_THROWS_AS(noise_ceiling(one), shape_error);
    }

    SECTION("constant voxels score zero") {
        Tensor a = Tensor::full({80, 1}, 2.0);
        Tensor b = Tensor::full({80, 1}, 2.0);
        CHECK(noise_ceiling({a, b})[0] == 0.0);
    }

    SECTION("known reliability is recovered") {
        // Ten repeats of unit-variance signal with unit noise: reliability of
        // the 10-repeat mean is 1 / (1 + 1/10).
        std::size_t T = 400, V = 40, k = 10;
        Tensor signal = Tensor::zeros({T, V});
        for (double& v : signal.vec()) v = rng.normal();
        std::vector<Tensor> reps;
        for (std::size_t r = 0; r < k; ++r) {
            Tensor t = signal;
            for (double& v : t.vec()) v += rng.normal();
            reps.push_back(t);
        }
        std::vector<double> ceil = noise_ceiling(reps);
        double mean = testutil::mean_of(ceil);
        CHECK(mean == Catch::Approx(1.0 / 1.1).margin(0.05));
        for (double c : ceil) {
            CHECK(c >= 0.0);
            CHECK(c <= 1.0);
        }
    }

    SECTION("pure noise stays near zero") {
        std::size_t T = 300, V = 30;
        std::vector<Tensor> reps;
        for (int r = 0; r < 4; ++r) {
            Tensor t = Tensor::zeros({T, V});
            for (double& v : t.vec()) v = rng.normal();
            reps.push_back(t);
        }
        std::vector<double> ceil = noise_ceiling(reps);
        CHECK(testutil::mean_of(ceil) < 0.15);
    }
}

TEST_CASE("voxel selection keeps the top scorers in ascending index order") {
    std::vector<double> scores(128);
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = static_cast<double>(i);
    VoxelSelection sel = select_voxels(scores, 64);
    REQUIRE(sel.indices.size() == 64);
    for (std::size_t i = 0; i < 64; ++i) {
        CHECK(sel.indices[i] == 64 + i);
        CHECK(sel.scores[i] == static_cast<double>(64 + i));
    }
    CHECK(sel.n_total == 128);

    // Ties resolve toward the lower index.
    std::vector<double> flat(6, 1.0);
    VoxelSelection tied = select_voxels(flat, 3);
    CHECK(tied.indices == std::vector<std::size_t>{0, 1, 2});

    CHECK_THROWS_AS(select_voxels(scores, 0), config_error);
    CHECK_THROWS_AS(select_voxels(flat, 7), shape_error);
}

TEST_CASE("voxel selection round-trips through JSON and gathers columns") {
    std::vector<double> scores = {0.1, 0.9, 0.5, 0.7};
    VoxelSelection sel = select_voxels(scores, 2, "reproducibility");
    nlohmann::json j = sel;
    VoxelSelection back = j.get<VoxelSelection>();
    CHECK(back.indices == sel.indices);
    CHECK(back.scores == sel.scores);
    CHECK(back.n_total == 4);
    CHECK(back.criterion == "reproducibility");

    Tensor series = Tensor::zeros({3, 4});
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t v = 0; v < 4; ++v) series.at(t, v) = static_cast<double>(10 * t + v);
    Tensor picked = apply_voxel_selection(series, sel);
    REQUIRE(picked.shape() == std::vector<std::size_t>{3, 2});
    // Selected indices are 1 and 3.
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(picked.at(t, 0) == static_cast<double>(10 * t + 1));
        CHECK(picked.at(t, 1) == static_cast<double>(10 * t + 3));
    }
}
