#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "nvrd/autodiff.hpp"
#include "nvrd/rng.hpp"
#include "nvrd/tensor.hpp"

namespace testutil {

using nvrd::Graph;
using nvrd::Rng;
using nvrd::Tensor;

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Central finite differences against the tape gradients. The loss builder
// receives fresh leaves bound to the current parameter values on every call,
// so the numeric and analytic paths share one definition of the function.
using LossBuilder = std::function<Graph::Ref(Graph&, const std::vector<Graph::Ref>&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

inline GradCheckResult grad_check(std::vector<Tensor>& params, const LossBuilder& make_loss,
                                  double h = 1e-4, std::size_t max_checks = 4096) {
    Graph g;
    std::vector<Graph::Ref> leaves;
    leaves.reserve(params.size());
    for (auto& p : params) leaves.push_back(g.leaf(p, true));
    Graph::Ref loss = make_loss(g, leaves);
    g.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (auto r : leaves) grads.push_back(g.grad(r));

    auto eval = [&]() {
        Graph gg;
        std::vector<Graph::Ref> ll;
        ll.reserve(params.size());
        for (auto& p : params) ll.push_back(gg.leaf(p, false));
        return gg.value(make_loss(gg, ll))[0];
    };

    std::size_t total = 0;
    for (auto& p : params) total += p.numel();
    std::size_t stride = total > max_checks ? (total + max_checks - 1) / max_checks : 1;

    GradCheckResult res;
    std::size_t flat = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < params[k].numel(); ++i, ++flat) {
            if (flat % stride != 0) continue;
            double orig = params[k][i];
            params[k][i] = orig + h;
            double fp = eval();
            params[k][i] = orig - h;
            double fm = eval();
            params[k][i] = orig;
            double numeric = (fp - fm) / (2.0 * h);
            double analytic = grads[k][i];
            double denom = std::max({1e-6, std::fabs(numeric), std::fabs(analytic)});
            res.max_rel_err = std::max(res.max_rel_err, std::fabs(numeric - analytic) / denom);
            ++res.checked;
        }
    }
    return res;
}

// Independent reference 2D convolution: explicitly pads, then slides.
// Deliberately structured differently from the library implementation.
inline Tensor reference_conv2d(const Tensor& x, const Tensor& w, const Tensor* b,
                               std::size_t stride, bool same_pad) {
    std::size_t H = x.dim(0), W = x.dim(1), Cin = x.dim(2);
    std::size_t KH = w.dim(0), KW = w.dim(1), Cout = w.dim(3);
    std::size_t OH, OW;
    long ph = 0, pw = 0;
    if (same_pad) {
        OH = (H + stride - 1) / stride;
        OW = (W + stride - 1) / stride;
        long pad_h = std::max<long>(0, static_cast<long>((OH - 1) * stride + KH) - static_cast<long>(H));
        long pad_w = std::max<long>(0, static_cast<long>((OW - 1) * stride + KW) - static_cast<long>(W));
        ph = pad_h / 2;
        pw = pad_w / 2;
    } else {
        OH = (H - KH) / stride + 1;
        OW = (W - KW) / stride + 1;
    }
    // materialize the padded input
    std::size_t PH = H + KH, PW = W + KW;  // generous bounds
    Tensor padded({PH, PW, Cin});
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t ww = 0; ww < W; ++ww)
            for (std::size_t c = 0; c < Cin; ++c)
                padded.at(h + static_cast<std::size_t>(ph), ww + static_cast<std::size_t>(pw), c) =
                    x.at(h, ww, c);
    Tensor out({OH, OW, Cout});
    for (std::size_t oh = 0; oh < OH; ++oh)
        for (std::size_t ow = 0; ow < OW; ++ow)
            for (std::size_t co = 0; co < Cout; ++co) {
                double s = b ? (*b)[co] : 0.0;
                for (std::size_t kh = 0; kh < KH; ++kh)
                    for (std::size_t kw = 0; kw < KW; ++kw)
                        for (std::size_t ci = 0; ci < Cin; ++ci)
                            s += padded.at(oh * stride + kh, ow * stride + kw, ci) * w.at(kh, kw, ci, co);
                out.at(oh, ow, co) = s;
            }
    return out;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

// Wilson-Hilferty approximation to the chi-square quantile, accurate to a
// fraction of a unit at the dof used in tests.
inline double chi2_quantile(double dof, double z_upper) {
    double t = 2.0 / (9.0 * dof);
    double base = 1.0 - t + z_upper * std::sqrt(t);
    return dof * base * base * base;
}

// Two-sided Kolmogorov-Smirnov p-value for a sample against Uniform(0,1).
inline double ks_uniform_pvalue(std::vector<double> sample) {
    std::sort(sample.begin(), sample.end());
    double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        double cdf = sample[i];
        d = std::max(d, std::fabs((i + 1) / n - cdf));
        d = std::max(d, std::fabs(cdf - i / n));
    }
    double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        p += 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
    }
    return std::clamp(p, 0.0, 1.0);
}

// Spearman rank correlation with midranks for ties.
inline std::vector<double> midranks(const std::vector<double>& v) {
    std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ra = midranks(a), rb = midranks(b);
    double ma = mean_of(ra), mb = mean_of(rb);
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

}  // namespace testutil
