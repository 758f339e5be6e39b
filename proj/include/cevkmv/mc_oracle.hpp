#pragma once

#include "cevkmv/estimation.hpp"
#include "cevkmv/inputs.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace cevkmv {

struct GbmDynamics {
    double sigma = 0.0;
};

struct CevDynamics {
    double delta = 0.0;
    double beta = 1.0;
};

struct SimSpec {
    std::variant<GbmDynamics, CevDynamics> dynamics;
    double v0 = 0.0;
    double rate = 0.0;
    double horizon = 1.0;
    std::size_t steps = 250;
    std::size_t paths = 100000;
    std::uint64_t seed = 0;

    void validate() const;
};

/// 250 steps per year, at least one.
std::size_t default_steps(double horizon);

struct SimResult {
    double estimate = 0.0;   // fraction of paths with V(T) < D
    double std_error = 0.0;  // sqrt(p (1 - p) / paths)
    double absorbed_fraction = 0.0;
    double discounted_mean = 0.0;  // mean of e^{-rT} V(T)
    double discounted_mean_se = 0.0;
};

/// Paths are cut into fixed blocks, each with its own seed derived from
/// spec.seed, and reduced in block order, so the result does not depend on
/// `workers`. GBM steps are exact lognormal; CEV steps are Euler on the level
/// with full truncation, and a path that reaches 0 stays there.
SimResult simulate_default_prob(const SimSpec& spec, double default_point, unsigned workers = 1);

/// splitmix64 finaliser, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Synthetic asset panel for estimation tests: per-firm lognormal starting
/// asset value, lognormal quarterly moves, and
///   sigma_A = delta_i V^(beta - 1) exp(noise Z).
struct PanelSpec {
    Group group = Group::NonST;
    double beta = 1.0;
    std::size_t firms = 186;
    std::size_t quarters = 9;
    double noise = 0.05;
    double asset_median = 10.0;
    double asset_log_sd = 1.0;
    double asset_step_sd = 0.15;
    double local_vol_median = 0.3;  // at the firm's starting asset value
    double local_vol_log_sd = 0.25;
    double leverage_median = 0.5;  // D / V at the start
    double leverage_log_sd = 0.5;
    double rate = 0.03;
    double horizon = 1.0;
    std::string first_quarter = "2019Q1";
};

AssetPanel simulate_panel(const PanelSpec& spec, std::uint64_t seed);
/// One panel per group, each from its own derived seed.
std::vector<AssetPanel> simulate_panel(const std::vector<PanelSpec>& groups, std::uint64_t seed);

/// Raw study inputs generated from daily CEV asset paths. Equity is the
/// Black-Scholes call on assets at the current local volatility, so the
/// equity returns carry the planted elasticity into the KMV inversion.
struct StudyGroupSpec {
    Group group = Group::NonST;
    std::size_t firms = 50;
    double beta = 1.0;
    double equity_median = 1.0;
    double equity_log_sd = 1.0;
    double debt_median = 1.0;
    double debt_log_sd = 1.0;
    /// Correlation of ln equity and ln default point across firms.
    double log_correlation = 0.85;
    double equity_vol_mean = 0.4;
    double equity_vol_sd = 0.1;
};

struct StudySpec {
    std::vector<StudyGroupSpec> groups;
    std::string first_quarter = "2019Q1";
    std::size_t quarters = 9;
    std::size_t history_days = 280;  // trading days simulated before the first quarter starts
    double rate = 0.03;
    double horizon = 1.0;
    std::uint64_t seed = 0;
};

/// Two groups at the equity, default point and equity-volatility scales of
/// the reference sample, ST planted at beta 0.98 and non-ST at 1.14.
StudySpec reference_study(std::size_t firms_per_group, std::size_t quarters, std::uint64_t seed);

RawInputs simulate_study_inputs(const StudySpec& spec);

}  // namespace cevkmv
