#pragma once

// Small statistics kit for per-cycle work samples: exponential fit by
// maximum likelihood and a one-sample Kolmogorov-Smirnov test against a
// fully specified exponential law.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ottomech {

struct ExponentialFit {
    double mean = 0.0; // first moment of the samples
    double rate = 0.0; // MLE rate 1/mean
};

inline ExponentialFit fit_exponential(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("fit_exponential: no samples");
    double s = 0.0;
    for (double v : x) s += v;
    const double mean = s / static_cast<double>(x.size());
    if (!(mean > 0.0))
        throw std::invalid_argument("fit_exponential: non-positive sample mean");
    return {mean, 1.0 / mean};
}

// Kolmogorov limit distribution Q(lam) = 2 sum_j (-1)^{j-1} exp(-2 j^2 lam^2),
// the asymptotic p-value of the scaled statistic.
inline double kolmogorov_q(double lam) {
    if (lam < 0.0) throw std::invalid_argument("kolmogorov_q: negative argument");
    if (lam < 0.2) return 1.0; // series converges too slowly; Q is 1 - O(1e-18)
    double sum = 0.0, sign = 1.0;
    for (int j = 1; j <= 200; ++j) {
        const double term = std::exp(-2.0 * j * j * lam * lam);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-14) break;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

struct KsResult {
    double statistic = 0.0; // sup |F_n - F|
    double p_value = 0.0;   // asymptotic, Stephens' finite-n scaling
    std::size_t n = 0;
};

// Exponential CDF with a fixed, externally supplied rate.  Testing against
// a fitted rate would need Lilliefors corrections; callers who fit first
// should treat the p-value as approximate.
inline KsResult ks_test_exponential(std::vector<double> x, double rate) {
    if (x.empty()) throw std::invalid_argument("ks_test_exponential: no samples");
    if (!(rate > 0.0)) throw std::invalid_argument("ks_test_exponential: rate must be positive");
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = x[i] > 0.0 ? 1.0 - std::exp(-rate * x[i]) : 0.0;
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    const double lam = d * (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n));
    return {d, kolmogorov_q(lam), x.size()};
}

struct Histogram {
    std::vector<double> edges;  // n_bins + 1
    std::vector<double> counts; // n_bins, raw counts
};

inline Histogram make_histogram(const std::vector<double>& x, int n_bins) {
    if (x.empty()) throw std::invalid_argument("make_histogram: no samples");
    if (n_bins < 1) throw std::invalid_argument("make_histogram: need at least one bin");
    auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    double lo = *lo_it, hi = *hi_it;
    if (lo == hi) { // degenerate data: one centred bin of unit width
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.edges.resize(n_bins + 1);
    h.counts.assign(n_bins, 0.0);
    const double w = (hi - lo) / n_bins;
    for (int k = 0; k <= n_bins; ++k) h.edges[k] = lo + w * k;
    for (double v : x) {
        int bin = static_cast<int>((v - lo) / w);
        bin = std::min(std::max(bin, 0), n_bins - 1);
        h.counts[bin] += 1.0;
    }
    return h;
}

} // namespace ottomech
