#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cevkmv {

/// CEV local volatility delta * V^(beta - 1). beta = 1 is GBM with sigma = delta.
struct CevParams {
    double delta = 0.0;
    double beta = 1.0;

    void validate() const;
    double local_vol(double asset_value) const;
};

enum class Scheme { CrankNicolson };

/// Uniform spatial grid on [x_min, x_max] for the backward Kolmogorov PDE.
///
/// x_max <= 0 selects the automatic upper bound max(4 V0, 4 D e^{rT}). The
/// spacing is then nudged so the default point falls midway between two nodes,
/// which keeps Crank-Nicolson unbiased on the indicator payoff.
struct PdeGrid {
    double x_min = 0.0;
    double x_max = 0.0;
    std::size_t num_space = 800;
    std::size_t num_time = 400;
    Scheme scheme = Scheme::CrankNicolson;
    std::size_t rannacher_steps = 2;
    /// Maximum change in u(0, V0) allowed when both grid sizes are doubled.
    double tolerance = 1e-4;
    bool check_convergence = true;

    void validate() const;
};

enum class ModelTag { ClassicalKMV, CevKmvFE, CevKmvEV };

std::string to_string(ModelTag tag);

struct DefaultDistanceRecord {
    std::string firm_id;
    std::string quarter;
    ModelTag model = ModelTag::ClassicalKMV;
    double probability = 0.0;
    double distance = 0.0;
};

/// Outcome of a PDE probability solve together with its self-check.
struct ProbabilityEstimate {
    double probability = 0.0;  // reported value
    double coarse = 0.0;       // on the requested grid
    double fine = 0.0;         // on the doubled grid (equal to coarse if unchecked)
    double grid_change = 0.0;  // |fine - coarse|
};

/// P(V_A(T) < D) under CEV dynamics with drift r, from the terminal-value
/// problem u_t + r x u_x + 0.5 delta^2 x^(2 beta) u_xx = 0, u(T, x) = 1{x < D}.
/// Crank-Nicolson with Rannacher startup; u = 1 at x_min and u = 0 at x_max.
///
/// With grid.check_convergence set (the default) the problem is also solved
/// with both grid sizes doubled; GridTooCoarse is thrown when the two answers
/// differ by more than grid.tolerance, otherwise the reported probability is
/// the Richardson extrapolation of the pair. Without the check the requested
/// grid's value is returned as is.
ProbabilityEstimate cev_default_probability_detail(double asset_value, const CevParams& params,
                                                   double default_point, double rate,
                                                   double horizon, const PdeGrid& grid = {});

double cev_default_probability(double asset_value, const CevParams& params, double default_point,
                               double rate, double horizon, const PdeGrid& grid = {});

/// Distance to default -N^{-1}(p); +inf at p = 0 and -inf at p = 1.
double cev_dd(double probability);

/// Hagan-Woodward equivalent Black volatility of a CEV call struck at the
/// default point, truncated after the two leading correction terms.
/// F = e^{rT} V_A, K = D, f = (F + K) / 2.
double hagan_woodward_vol(double asset_value, double default_point, double rate, double horizon,
                          const CevParams& params);

enum class OptionKind { Call, Put };

/// Black-Scholes price of a European option.
double black_scholes_price(OptionKind kind, double spot, double strike, double rate, double vol,
                           double horizon);

/// Volatility that reproduces `price` in the Black-Scholes formula.
/// Throws NoConvergence when the price lies outside the no-arbitrage bounds.
double implied_vol(OptionKind kind, double price, double spot, double strike, double rate,
                   double horizon);

/// European option under CEV dynamics, priced on the same Crank-Nicolson
/// machinery (strike on a grid node, discounting at r). No convergence check.
double cev_option_price(OptionKind kind, double spot, double strike, double rate, double horizon,
                        const CevParams& params, const PdeGrid& grid = {});

}  // namespace cevkmv
