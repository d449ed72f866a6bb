#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "nvrd/errors.hpp"

namespace nvrd::sim {

// Discrete hemodynamic response kernel sampled at the repetition time.
// Taps sum to one, the peak tap sits within one TR of peak_seconds, and the
// sampled support covers at least ten seconds.
struct HrfKernel {
    std::vector<double> taps;
    double tr_seconds = 2.0;
    double peak_seconds = 5.0;

    void validate() const {
        require(!taps.empty(), "hrf: no taps");
        require(tr_seconds > 0.0, "hrf: tr must be positive");
        double support = static_cast<double>(taps.size() - 1) * tr_seconds;
        require(support >= 10.0 - 1e-9, "hrf: sampled support must cover at least 10 s");
        double s = 0.0;
        for (double t : taps) s += t;
        require(std::fabs(s - 1.0) < 1e-9, "hrf: taps must sum to 1");
        std::size_t arg = 0;
        for (std::size_t i = 1; i < taps.size(); ++i)
            if (taps[i] > taps[arg]) arg = i;
        double peak_t = static_cast<double>(arg) * tr_seconds;
        require(std::fabs(peak_t - peak_seconds) <= tr_seconds + 1e-9,
                "hrf: peak tap further than one TR from the nominal peak");
    }

    std::size_t argmax_tap() const {
        std::size_t arg = 0;
        for (std::size_t i = 1; i < taps.size(); ++i)
            if (taps[i] > taps[arg]) arg = i;
        return arg;
    }
};

// Unnormalized continuous response: difference of two gamma densities with
// unit scale. The positive lobe peaks at peak_seconds, the undershoot is
// centered seven seconds later at one sixth amplitude.
inline double hrf_continuous(double t, double peak_seconds) {
    if (t < 0.0) return 0.0;
    auto gamma_density = [](double x, double shape) {
        if (x <= 0.0) return 0.0;
        return std::exp((shape - 1.0) * std::log(x) - x - std::lgamma(shape));
    };
    double k1 = peak_seconds + 1.0;        // mode at peak_seconds
    double k2 = peak_seconds + 8.0;        // undershoot mode at peak + 7
    return gamma_density(t, k1) - gamma_density(t, k2) / 6.0;
}

// Sample the canonical response at the TR grid 0, tr, ..., duration and
// normalize the taps to unit sum.
inline HrfKernel canonical_hrf(double tr_seconds, double duration_seconds = 20.0,
                               double peak_seconds = 5.0) {
    require_config(tr_seconds > 0.0, "canonical_hrf: tr must be positive");
    require_config(duration_seconds >= 10.0, "canonical_hrf: duration must be at least 10 s");
    require_config(peak_seconds > 0.0 && peak_seconds < duration_seconds,
            "canonical_hrf: peak must lie inside the sampled support");
    std::size_t n = static_cast<std::size_t>(std::floor(duration_seconds / tr_seconds + 1e-9)) + 1;
    HrfKernel k;
    k.tr_seconds = tr_seconds;
    k.peak_seconds = peak_seconds;
    k.taps.resize(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        k.taps[i] = hrf_continuous(static_cast<double>(i) * tr_seconds, peak_seconds);
        sum += k.taps[i];
    }
    require(sum > 1e-9, "canonical_hrf: degenerate kernel");
    for (double& t : k.taps) t /= sum;
    k.validate();
    return k;
}

// Causal convolution along time with zero history: out[t] = sum_k taps[k] * in[t-k].
// in is (T,V) row-major with V fastest.
inline std::vector<double> causal_convolve(const std::vector<double>& series, std::size_t T,
                                           std::size_t V, const std::vector<double>& taps) {
    require_shape(series.size() == T * V, "causal_convolve: series size mismatch");
    std::vector<double> out(T * V, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        std::size_t kmax = std::min(taps.size() - 1, t);
        for (std::size_t k = 0; k <= kmax; ++k) {
            double w = taps[k];
            const double* src = series.data() + (t - k) * V;
            double* dst = out.data() + t * V;
            for (std::size_t v = 0; v < V; ++v) dst[v] += w * src[v];
        }
    }
    return out;
}

}  // namespace nvrd::sim
