#include "cevkmv/stats_tests.hpp"

#include "cevkmv/errors.hpp"
#include "cevkmv/normal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <vector>

namespace cevkmv {

using detail::require;

double digamma(double x) {
    require(std::isfinite(x) && x > 0.0, "digamma: x must be > 0");
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double r = 1.0 / (x * x);
    const double series =
        r * (1.0 / 12 - r * (1.0 / 120 - r * (1.0 / 252 - r * (1.0 / 240 - r * (1.0 / 132)))));
    return acc + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
    require(std::isfinite(x) && x > 0.0, "trigamma: x must be > 0");
    double acc = 0.0;
    while (x < 10.0) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double r = 1.0 / (x * x);
    // 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
    const double series =
        (1.0 + r * (1.0 / 6 - r * (1.0 / 30 - r * (1.0 / 42 - r * (1.0 / 30 - r * (5.0 / 66)))))) / x;
    return acc + series + 0.5 * r;
}

double gamma_pdf(double x, double alpha, double beta) {
    if (x <= 0.0) return 0.0;
    return std::exp(alpha * std::log(beta) + (alpha - 1.0) * std::log(x) - beta * x -
                    std::lgamma(alpha));
}

double gamma_loglik(std::span<const double> sample, double alpha, double beta) {
    double s = 0.0;
    for (double x : sample)
        s += alpha * std::log(beta) + (alpha - 1.0) * std::log(x) - beta * x - std::lgamma(alpha);
    return s;
}

GammaFit gamma_mle(std::span<const double> sample) {
    const std::size_t n = sample.size();
    require(n >= 2, "gamma_mle: need at least 2 observations");
    double sum = 0.0, sum_log = 0.0;
    for (double x : sample) {
        require(std::isfinite(x) && x > 0.0, "gamma_mle: observations must be > 0");
        sum += x;
        sum_log += std::log(x);
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (double x : sample) ss += (x - mean) * (x - mean);
    const double var = ss / n;
    const double s = std::log(mean) - sum_log / n;
    if (var == 0.0 || !(s > 0.0)) throw DegenerateSample("gamma_mle: sample has zero variance");

    double alpha = mean * mean / var;
    for (int it = 0; it < 200; ++it) {
        const double h = std::log(alpha) - digamma(alpha) - s;
        const double dh = 1.0 / alpha - trigamma(alpha);
        double next = alpha - h / dh;
        if (!(next > 0.0)) next = 0.5 * alpha;
        const bool done = std::abs(next - alpha) <= 1e-15 * alpha;
        alpha = next;
        if (done) break;
    }

    GammaFit fit;
    fit.alpha = alpha;
    fit.beta = alpha / mean;
    fit.n = n;
    fit.loglik = gamma_loglik(sample, fit.alpha, fit.beta);
    return fit;
}

ZTest z1_test(std::span<const double> x, std::span<const double> y) {
    const GammaFit fx = gamma_mle(x);
    const GammaFit fy = gamma_mle(y);
    const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    const double var = fx.alpha / (x.size() * fx.beta * fx.beta) +
                       fy.alpha / (y.size() * fy.beta * fy.beta);
    const double z = (xbar - ybar) / std::sqrt(var);
    return {z, normal_cdf(z)};
}

namespace {

// Midranks of the pooled sample x ++ y.
std::vector<double> midranks(std::span<const double> x, std::span<const double> y) {
    std::vector<double> pooled(x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());
    std::vector<std::size_t> order(pooled.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> rank(pooled.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
        i = j + 1;
    }
    return rank;
}

}  // namespace

double rank_sum(std::span<const double> x, std::span<const double> y) {
    const auto rank = midranks(x, y);
    return std::accumulate(rank.begin(), rank.begin() + x.size(), 0.0);
}

ZTest z2_wilcoxon(std::span<const double> x, std::span<const double> y) {
    require(!x.empty() && !y.empty(), "z2_wilcoxon: both samples must be non-empty");
    const double m = static_cast<double>(x.size());
    const double n = static_cast<double>(y.size());
    const double w = rank_sum(x, y);
    const double z = (w - m * (m + n + 1.0) / 2.0) / std::sqrt(m * n * (m + n + 1.0) / 12.0);
    return {z, normal_cdf(z)};
}

double wilcoxon_exact_p(std::span<const double> x, std::span<const double> y) {
    require(!x.empty() && !y.empty(), "wilcoxon_exact_p: both samples must be non-empty");
    const std::size_t total = x.size() + y.size();
    require(total <= 24, "wilcoxon_exact_p: pooled sample too large to enumerate");
    const auto rank = midranks(x, y);
    const double observed = std::accumulate(rank.begin(), rank.begin() + x.size(), 0.0);

    std::size_t hits = 0, count = 0;
    for (unsigned long mask = 0; mask < (1UL << total); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != x.size()) continue;
        double w = 0.0;
        for (std::size_t k = 0; k < total; ++k)
            if (mask & (1UL << k)) w += rank[k];
        ++count;
        if (w <= observed + 1e-9) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(count);
}

TestReport compare_groups(const std::string& quarter, std::span<const double> st,
                          std::span<const double> nst) {
    TestReport r;
    r.quarter = quarter;
    r.m = st.size();
    r.n = nst.size();
    r.st_fit = gamma_mle(st);
    r.nst_fit = gamma_mle(nst);
    const ZTest t1 = z1_test(st, nst);
    const ZTest t2 = z2_wilcoxon(st, nst);
    r.z1 = t1.z;
    r.p1 = t1.p;
    r.z2 = t2.z;
    r.p2 = t2.p;
    return r;
}

}  // namespace cevkmv
