#include "cevkmv/errors.hpp"
#include "cevkmv/market_model.hpp"
#include "cevkmv/mc_oracle.hpp"
#include "cevkmv/normal.hpp"
#include "cevkmv/pipeline.hpp"
#include "cevkmv/report.hpp"
#include "cevkmv/stats_tests.hpp"
#include "fixtures.hpp"

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace cevkmv;

namespace {

double lognormal_prob(double v, double s, double d, double r, double t) {
    boost::math::normal_distribution<double> n01;
    return boost::math::cdf(n01, -(std::log(v / d) + (r - 0.5 * s * s) * t) / (s * std::sqrt(t)));
}

SimSpec gbm(double sigma, double v0, std::size_t paths, std::uint64_t seed) {
    SimSpec s;
    s.dynamics = GbmDynamics{sigma};
    s.v0 = v0;
    s.rate = 0.03;
    s.horizon = 1.0;
    s.paths = paths;
    s.seed = seed;
    return s;
}

SimSpec cev(double local_vol, double beta, double v0, std::size_t paths, std::uint64_t seed) {
    SimSpec s;
    s.dynamics = CevDynamics{local_vol * std::pow(v0, 1.0 - beta), beta};
    s.v0 = v0;
    s.rate = 0.03;
    s.horizon = 1.0;
    s.paths = paths;
    s.seed = seed;
    return s;
}

}  // namespace

TEST(SimSpec, Validation) {
    auto s = gbm(0.2, 100, 10, 1);
    EXPECT_NO_THROW(s.validate());
    s.steps = 0;
    EXPECT_THROW(s.validate(), DomainError);
    s = gbm(0.2, 100, 0, 1);
    EXPECT_THROW(s.validate(), DomainError);
    s = cev(0.2, -1.0, 100, 10, 1);
    EXPECT_THROW(s.validate(), DomainError);
    EXPECT_THROW(simulate_default_prob(gbm(0.2, -3, 10, 1), 80), DomainError);
    EXPECT_EQ(default_steps(1.0), 250u);
    EXPECT_EQ(default_steps(0.001), 1u);
}

TEST(SimulateDefaultProb, GbmMedianStrike) {
    const double s = 0.3, v0 = 100, r = 0.03, t = 1;
    const double d = v0 * std::exp((r - 0.5 * s * s) * t);
    const auto res = simulate_default_prob(gbm(s, v0, 200000, 5), d);
    EXPECT_NEAR(res.estimate, 0.5, 3 * res.std_error);
}

TEST(SimulateDefaultProb, GbmReferenceFirm) {
    const auto res = simulate_default_prob(gbm(0.25, 150, 1000000, 6), 80);
    EXPECT_NEAR(res.estimate, lognormal_prob(150, 0.25, 80, 0.03, 1), 3 * res.std_error);
    EXPECT_NEAR(res.std_error, std::sqrt(res.estimate * (1 - res.estimate) / 1e6), 1e-15);
}

TEST(SimulateDefaultProb, CevAtBetaOneMatchesGbm) {
    auto c = cev(0.3, 1.0, 100, 300000, 7);
    auto g = gbm(0.3, 100, 300000, 7);
    const auto rc = simulate_default_prob(c, 85);
    const auto rg = simulate_default_prob(g, 85);
    const double se = std::sqrt(rc.std_error * rc.std_error + rg.std_error * rg.std_error);
    EXPECT_NEAR(rc.estimate, rg.estimate, 3 * se);
    EXPECT_EQ(rc.absorbed_fraction, 0.0);
}

TEST(SimulateDefaultProb, SeedDeterminism) {
    const auto spec = cev(0.4, 0.7, 100, 70000, 8);
    const auto a = simulate_default_prob(spec, 80);
    const auto b = simulate_default_prob(spec, 80);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_EQ(a.discounted_mean, b.discounted_mean);
    auto other = spec;
    other.seed = 9;
    EXPECT_NE(simulate_default_prob(other, 80).discounted_mean, a.discounted_mean);
}

TEST(SimulateDefaultProb, WorkerCountDoesNotMatter) {
    const auto spec = cev(0.4, 0.7, 100, 150000, 10);
    const auto one = simulate_default_prob(spec, 80, 1);
    const auto four = simulate_default_prob(spec, 80, 4);
    EXPECT_EQ(one.estimate, four.estimate);
    EXPECT_EQ(one.discounted_mean, four.discounted_mean);
    EXPECT_EQ(one.absorbed_fraction, four.absorbed_fraction);
}

TEST(SimulateDefaultProb, GbmMartingale) {
    const auto res = simulate_default_prob(gbm(0.4, 100, 500000, 11), 80);
    EXPECT_NEAR(res.discounted_mean, 100.0, 4 * res.discounted_mean_se);
}

TEST(SimulateDefaultProb, AbsorbedPathsCountAsDefaults) {
    auto spec = cev(1.2, 0.3, 10, 100000, 12);
    const auto res = simulate_default_prob(spec, 1e-9);
    EXPECT_GT(res.absorbed_fraction, 0.0);
    EXPECT_GE(res.estimate, res.absorbed_fraction);
}

TEST(SimulateDefaultProb, EulerStepHalvingBias) {
    for (double beta : {0.6, 1.4}) {
        auto coarse = cev(0.3, beta, 100, 1000000, 13);
        auto fine = coarse;
        fine.steps = 2 * coarse.steps;
        const auto a = simulate_default_prob(coarse, 80);
        const auto b = simulate_default_prob(fine, 80);
        const double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
        EXPECT_LT(std::abs(a.estimate - b.estimate), 2 * se) << beta;
    }
}

TEST(MixSeed, DistinctStreams) {
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
    EXPECT_EQ(mix_seed(3, 4), mix_seed(3, 4));
}

TEST(SimulatePanel, ShapeAndDeterminism) {
    PanelSpec s;
    s.firms = 12;
    s.quarters = 5;
    const auto a = simulate_panel(s, 3), b = simulate_panel(s, 3);
    ASSERT_EQ(a.entries.size(), 60u);
    EXPECT_NO_THROW(a.validate());
    EXPECT_EQ(a.firms().size(), 12u);
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        EXPECT_EQ(a.entries[i].asset_value, b.entries[i].asset_value);
        EXPECT_EQ(a.entries[i].asset_vol, b.entries[i].asset_vol);
    }
    EXPECT_EQ(a.entries[0].quarter, "2019Q1");
    EXPECT_EQ(a.entries[4].quarter, "2020Q1");
}

TEST(SimulatePanel, NoiselessRecoversBetaExactly) {
    PanelSpec s;
    s.beta = 1.185;
    s.noise = 0.0;
    EXPECT_NEAR(fit_fixed_effects(simulate_panel(s, 14)).beta, 1.185, 1e-12);
}

TEST(SimulatePanel, NoisyRecoveryAcrossSeeds) {
    PanelSpec s;
    s.beta = 1.185;
    s.noise = 0.05;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        EXPECT_NEAR(fit_fixed_effects(simulate_panel(s, seed)).beta, 1.185, 0.02) << seed;
}

TEST(SimulatePanel, TwoGroupZ1Power) {
    // Last-quarter CEV distances from each group's own fixed-effects fit;
    // the gamma test uses the positive distances.
    PdeGrid grid;
    grid.num_space = 400;
    grid.num_time = 200;
    grid.check_convergence = false;
    const int seeds = 20;
    int rejections = 0;
    for (int seed = 0; seed < seeds; ++seed) {
        const auto panels = simulate_panel(fixtures::two_group_specs(), 500 + seed);
        std::vector<double> dd[2];
        for (int g = 0; g < 2; ++g) {
            const auto fit = fit_fixed_effects(panels[g]);
            AssetPanel last;
            last.group = panels[g].group;
            for (const auto& e : panels[g].entries)
                if (e.quarter == "2021Q1") last.entries.push_back(e);
            for (const auto& r : dd_panel(last, fit, grid)) dd[g].push_back(r.distance);
        }
        if (z1_test(positive_part(dd[0]), positive_part(dd[1])).p < 0.05) ++rejections;
    }
    RecordProperty("rejections", rejections);
    EXPECT_GE(rejections, (9 * seeds + 9) / 10) << rejections << " of " << seeds;
}

TEST(ReferenceStudy, Magnitudes) {
    // Scale sanity at the first quarter: firms are drawn at the sample medians
    // a year of history earlier, and equity drifts down from there.
    const auto spec = reference_study(1000, 2, 1);
    ASSERT_EQ(spec.groups.size(), 2u);
    EXPECT_EQ(spec.groups[0].group, Group::ST);
    EXPECT_DOUBLE_EQ(spec.groups[0].beta, 0.98);
    EXPECT_DOUBLE_EQ(spec.groups[1].beta, 1.14);
    const auto in = simulate_study_inputs(spec);
    std::vector<double> eq[2], dp[2];
    for (const auto& f : in.fundamentals) {
        if (f.quarter != "2019Q1") continue;
        const int g = f.group == Group::ST ? 0 : 1;
        eq[g].push_back(*f.equity_value);
        dp[g].push_back(default_point(*f.std_debt, *f.ltd_debt));
    }
    auto median = [](std::vector<double> x) {
        std::sort(x.begin(), x.end());
        return x[x.size() / 2];
    };
    EXPECT_NEAR(std::log(median(eq[0]) / 2.530), 0.0, 0.25);
    EXPECT_NEAR(std::log(median(eq[1]) / 8.165), 0.0, 0.25);
    EXPECT_NEAR(std::log(median(dp[0]) / 1.140), 0.0, 0.25);
    EXPECT_NEAR(std::log(median(dp[1]) / 4.433), 0.0, 0.25);
}

TEST(ReferenceStudy, InputsDeterministicAndComplete) {
    const auto spec = reference_study(5, 3, 77);
    const auto a = simulate_study_inputs(spec), b = simulate_study_inputs(spec);
    ASSERT_EQ(a.fundamentals.size(), 30u);
    EXPECT_EQ(a.rates.size(), 3u);
    for (const auto& [firm, rets] : a.daily_returns) {
        const auto& other = b.daily_returns.at(firm);
        ASSERT_EQ(rets.size(), other.size());
        EXPECT_GE(rets.size(), 250u);
        for (std::size_t i = 0; i < rets.size(); ++i) EXPECT_EQ(rets[i].value, other[i].value);
    }
}
