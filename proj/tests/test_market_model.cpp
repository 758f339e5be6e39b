#include "cevkmv/errors.hpp"
#include "cevkmv/market_model.hpp"
#include "cevkmv/mc_oracle.hpp"
#include "cevkmv/normal.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace cevkmv;

namespace {

// Discounted expectation of the call payoff under the lognormal terminal law,
// integrated over the standard normal shock.
double call_by_quadrature(double v, double d, double r, double s, double t) {
    auto integrand = [&](double z) {
        const double vt = v * std::exp((r - 0.5 * s * s) * t + s * std::sqrt(t) * z);
        return std::max(vt - d, 0.0) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    };
    const double integral =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -12.0, 12.0, 15, 1e-14);
    return std::exp(-r * t) * integral;
}

FirmQuarterObservation observe(double va, double sa, double d, double r, double t) {
    const auto eq = kmv_forward(va, sa, d, r, t);
    FirmQuarterObservation obs;
    obs.firm_id = "F";
    obs.quarter = "2019Q1";
    obs.equity_value = eq.equity_value;
    obs.equity_vol = eq.equity_vol;
    obs.default_point = d;
    obs.rate = r;
    obs.horizon = t;
    return obs;
}

}  // namespace

TEST(Normal, CdfMatchesBoost) {
    boost::math::normal_distribution<double> n01;
    for (double x = -8.0; x <= 8.0; x += 0.125) {
        const double ref = boost::math::cdf(n01, x);
        EXPECT_NEAR(normal_cdf(x), ref, 1e-15) << x;
        EXPECT_NEAR(normal_cdf(x) / ref, 1.0, 1e-13) << x;
    }
    EXPECT_NEAR(normal_cdf(-10.0) / 7.61985302416e-24, 1.0, 1e-10);
}

TEST(Normal, QuantileMatchesBoost) {
    boost::math::normal_distribution<double> n01;
    for (double p : {1e-300, 1e-20, 1e-9, 1e-4, 0.02275, 0.3, 0.5, 0.7, 0.99, 1 - 1e-9}) {
        EXPECT_NEAR(normal_quantile(p), boost::math::quantile(n01, p), 1e-9) << p;
    }
    EXPECT_EQ(normal_quantile(0.0), -std::numeric_limits<double>::infinity());
    EXPECT_EQ(normal_quantile(1.0), std::numeric_limits<double>::infinity());
    EXPECT_TRUE(std::isnan(normal_quantile(1.5)));
}

TEST(Normal, RoundTrip) {
    for (double x = -6.0; x <= 0.0; x += 0.01) EXPECT_NEAR(normal_quantile(normal_cdf(x)), x, 1e-9);
    // Above 0 the round trip is limited by how finely doubles near 1 resolve
    // N(x): one ulp of 1 moves x by about 1.1e-16 / pdf(x).
    for (double x = 0.0; x <= 6.0; x += 0.01) {
        const double limit = 1e-9 + 2.3e-16 / normal_pdf(x);
        EXPECT_NEAR(normal_quantile(normal_cdf(x)), x, limit);
    }
}

TEST(BsmCall, ZeroStrikeIsUnderlying) {
    EXPECT_DOUBLE_EQ(bsm_call(100, 0, 0.03, 0.4, 1), 100.0);
}

TEST(BsmCall, ZeroVolIsDiscountedForward) {
    EXPECT_NEAR(bsm_call(100, 80, 0.03, 0.0, 1), 100 - 80 * std::exp(-0.03), 1e-12);
    EXPECT_NEAR(bsm_call(100, 80, 0.03, 0.0, 1), 22.364, 1e-3);
}

TEST(BsmCall, MatchesLognormalQuadrature) {
    const double ref = call_by_quadrature(100, 80, 0.03, 0.4, 1);
    EXPECT_NEAR(bsm_call(100, 80, 0.03, 0.4, 1), ref, 1e-9);
    for (double s : {0.05, 0.2, 0.8}) {
        for (double t : {0.25, 2.0}) {
            EXPECT_NEAR(bsm_call(150, 80, 0.01, s, t), call_by_quadrature(150, 80, 0.01, s, t), 1e-8);
        }
    }
}

TEST(BsmCall, RejectsBadInputs) {
    EXPECT_THROW(bsm_call(-1, 80, 0.03, 0.4, 1), DomainError);
    EXPECT_THROW(bsm_call(100, -1, 0.03, 0.4, 1), DomainError);
    EXPECT_THROW(bsm_call(100, 80, 0.03, -0.1, 1), DomainError);
    EXPECT_THROW(bsm_call(100, 80, 0.03, 0.4, 0), DomainError);
    EXPECT_THROW(bsm_call(std::nan(""), 80, 0.03, 0.4, 1), DomainError);
}

TEST(BsmCall, BoundsAndMonotonicity) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const double v = 1 + 200 * u(rng), d = 1 + 200 * u(rng), r = 0.1 * u(rng) - 0.02;
        const double s = 0.02 + u(rng), t = 0.1 + 3 * u(rng);
        const double c = bsm_call(v, d, r, s, t);
        EXPECT_GE(c, std::max(v - std::exp(-r * t) * d, 0.0) - 1e-12 * v);
        EXPECT_LE(c, v);
        // Strictness is only visible while delta and vega are resolvable in doubles.
        const auto dt = bsm_d_terms(v, d, r, s, t);
        if (std::abs(dt.d1) < 5 && std::abs(dt.d2) < 5) {
            EXPECT_GT(bsm_call(v * 1.01, d, r, s, t), c);
            EXPECT_GT(bsm_call(v, d, r, s * 1.05, t), c);
        } else {
            EXPECT_GE(bsm_call(v * 1.01, d, r, s, t), c);
            EXPECT_GE(bsm_call(v, d, r, s * 1.05, t), c);
        }
    }
}

TEST(KmvEquityVol, TrivialCases) {
    EXPECT_DOUBLE_EQ(kmv_equity_vol(100, 100, 0.3, std::numeric_limits<double>::infinity()), 0.3);
    EXPECT_DOUBLE_EQ(kmv_equity_vol(100, 40, 0.0, 0.5), 0.0);
    EXPECT_THROW(kmv_equity_vol(100, 0.0, 0.3, 0.5), DomainError);
}

TEST(KmvEquityVol, MatchesFiniteDifferenceDelta) {
    const double v = 100, d = 80, r = 0.03, s = 0.4, t = 1;
    const double h = 1e-4 * v;
    const double delta = (bsm_call(v + h, d, r, s, t) - bsm_call(v - h, d, r, s, t)) / (2 * h);
    const double ve = bsm_call(v, d, r, s, t);
    const double ref = delta * s * v / ve;
    EXPECT_NEAR(kmv_equity_vol(v, ve, s, bsm_d_terms(v, d, r, s, t).d1), ref, 1e-8);
}

TEST(InvertKmv, RoundTripReferenceFirm) {
    const auto obs = observe(150, 0.25, 80, 0.03, 1);
    const auto sol = invert_kmv(obs);
    EXPECT_NEAR(sol.asset_value / 150 - 1, 0.0, 1e-8);
    EXPECT_NEAR(sol.asset_vol / 0.25 - 1, 0.0, 1e-8);
    EXPECT_LE(sol.residual_norm, 1e-10);
    EXPECT_FALSE(sol.degenerate);
}

TEST(InvertKmv, ReproducesEquityToTolerance) {
    const auto obs = observe(40, 0.6, 35, 0.02, 2);
    const auto sol = invert_kmv(obs);
    const double ve = bsm_call(sol.asset_value, obs.default_point, obs.rate, sol.asset_vol, obs.horizon);
    const double d1 = bsm_d_terms(sol.asset_value, obs.default_point, obs.rate, sol.asset_vol, obs.horizon).d1;
    EXPECT_NEAR(ve / obs.equity_value - 1, 0.0, 1e-10);
    EXPECT_NEAR(kmv_equity_vol(sol.asset_value, ve, sol.asset_vol, d1) / obs.equity_vol - 1, 0.0, 1e-10);
}

TEST(InvertKmv, ZeroDebtIsDegenerate) {
    FirmQuarterObservation obs{"F", "2019Q1", 12.5, 0.37, 0.0, 0.03, 1.0, Group::ST};
    const auto sol = invert_kmv(obs);
    EXPECT_TRUE(sol.degenerate);
    EXPECT_EQ(sol.asset_value, 12.5);
    EXPECT_EQ(sol.asset_vol, 0.37);
    EXPECT_EQ(classical_dd(sol, obs), std::numeric_limits<double>::infinity());
}

TEST(InvertKmv, StScaleSanity) {
    FirmQuarterObservation obs{"F", "2019Q1", 3.819, 0.480, 4.899, 0.03, 1.0, Group::ST};
    const auto sol = invert_kmv(obs);
    EXPECT_GT(sol.asset_value, obs.equity_value);
    EXPECT_GT(sol.asset_vol, 0.0);
}

TEST(InvertKmv, Deterministic) {
    const auto obs = observe(7.3, 0.31, 5.1, 0.025, 1);
    const auto a = invert_kmv(obs), b = invert_kmv(obs);
    EXPECT_EQ(a.asset_value, b.asset_value);
    EXPECT_EQ(a.asset_vol, b.asset_vol);
}

TEST(InvertKmv, RejectsInvalidObservation) {
    FirmQuarterObservation obs{"F", "2019Q1", -1.0, 0.4, 1.0, 0.03, 1.0, Group::ST};
    EXPECT_THROW(invert_kmv(obs), DomainError);
    obs.equity_value = 1.0;
    obs.equity_vol = 0.0;
    EXPECT_THROW(invert_kmv(obs), DomainError);
}

TEST(InvertKmv, UnreachableToleranceRaises) {
    const auto obs = observe(150, 0.9, 140, 0.03, 1);
    InversionSettings s;
    s.tolerance = 1e-300;
    s.max_iterations = 5;
    EXPECT_THROW(invert_kmv(obs, s), NoConvergence);
}

TEST(InvertKmv, RandomRoundTrip) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const double va = std::exp(std::log(0.5) + u(rng) * std::log(100.0));
        const double sa = 0.05 + 0.75 * u(rng);
        const double d = va * (0.05 + 0.9 * u(rng));
        const double r = 0.06 * u(rng);
        const double t = 0.25 + 1.75 * u(rng);
        const auto sol = invert_kmv(observe(va, sa, d, r, t));
        EXPECT_NEAR(sol.asset_value / va - 1, 0.0, 1e-8) << va << ' ' << sa << ' ' << d << ' ' << t;
        EXPECT_NEAR(sol.asset_vol / sa - 1, 0.0, 1e-8) << va << ' ' << sa << ' ' << d << ' ' << t;
    }
}

TEST(ClassicalDd, ZeroWhenNumeratorVanishes) {
    const double d = 80, r = 0.03, s = 0.25, t = 1;
    const double va = d * std::exp(-(r - 0.5 * s * s) * t);
    EXPECT_NEAR(classical_dd(va, s, d, r, t), 0.0, 1e-14);
}

TEST(ClassicalDd, LiteralFormula) {
    const double dd = classical_dd(150, 0.25, 80, 0.03, 1);
    EXPECT_NEAR(dd, (std::log(150.0 / 80) + (0.03 - 0.5 * 0.0625)) / 0.25, 1e-14);
}

TEST(ClassicalDd, MatchesGbmMonteCarlo) {
    SimSpec spec;
    spec.dynamics = GbmDynamics{0.25};
    spec.v0 = 150;
    spec.rate = 0.03;
    spec.horizon = 1;
    spec.steps = 1;
    spec.paths = 1000000;
    spec.seed = 2024;
    const auto mc = simulate_default_prob(spec, 80);
    const double p = normal_cdf(-classical_dd(150, 0.25, 80, 0.03, 1));
    EXPECT_NEAR(p, mc.estimate, 3 * mc.std_error);
}

TEST(ClassicalDd, MonotoneAndProbabilityInsideUnitInterval) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const double va = 1 + 100 * u(rng), s = 0.05 + 0.8 * u(rng), d = 0.1 + 100 * u(rng);
        const double r = 0.05 * u(rng), t = 0.25 + 2 * u(rng);
        const double dd = classical_dd(va, s, d, r, t);
        EXPECT_GT(classical_dd(va * 1.01, s, d, r, t), dd);
        EXPECT_LT(classical_dd(va, s, d * 1.01, r, t), dd);
        const double p = normal_cdf(-dd);
        // N(-dd) rounds to 1 in doubles once dd < -8.3.
        if (dd > -8 && dd < 37) {
            EXPECT_GT(p, 0.0);
            EXPECT_LT(p, 1.0);
        }
    }
}

TEST(ClassicalDd, PopulationMeanFromGammaDistances) {
    // Firms whose true distance is Gamma(shape 4.183, scale 1.075); each is
    // observed through its equity and inverted back. Mean should be ~4.498.
    std::mt19937_64 rng(186);
    std::gamma_distribution<double> g(4.183, 1.075);
    const double d = 1.0, r = 0.03, s = 0.3, t = 1.0;
    const int n = 20000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double target = g(rng);
        const double va = d * std::exp(target * s * std::sqrt(t) - (r - 0.5 * s * s) * t);
        const auto obs = observe(va, s, d, r, t);
        const double dd = classical_dd(invert_kmv(obs), obs);
        sum += dd;
        sum2 += dd * dd;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, 4.498, 3 * se + 1e-3);
}
