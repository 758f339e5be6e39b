#include "cevkmv/cev_engine.hpp"

#include "cevkmv/errors.hpp"
#include "cevkmv/market_model.hpp"
#include "cevkmv/normal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace cevkmv {

using detail::require;

void CevParams::validate() const {
    require(std::isfinite(delta) && delta > 0.0, "CEV delta must be finite and > 0");
    require(std::isfinite(beta) && beta > 0.0, "CEV beta must be finite and > 0");
}

double CevParams::local_vol(double asset_value) const {
    return delta * std::pow(asset_value, beta - 1.0);
}

void PdeGrid::validate() const {
    require(std::isfinite(x_min) && x_min >= 0.0, "grid x_min must be >= 0");
    require(std::isfinite(x_max), "grid x_max must be finite");
    require(num_space >= 3, "grid needs at least 3 space nodes");
    require(num_time >= 1, "grid needs at least 1 time step");
    require(rannacher_steps <= num_time, "rannacher_steps cannot exceed num_time");
    require(tolerance > 0.0, "grid tolerance must be > 0");
}

std::string to_string(ModelTag tag) {
    switch (tag) {
        case ModelTag::ClassicalKMV: return "ClassicalKMV";
        case ModelTag::CevKmvFE: return "CevKmvFE";
        case ModelTag::CevKmvEV: return "CevKmvEV";
    }
    return "unknown";
}

namespace {

/// Nodes uniform in y = ln x.
struct LogGrid {
    double y_min;
    double h;
    std::size_t n;
    double y(std::size_t j) const { return y_min + static_cast<double>(j) * h; }
    double x(std::size_t j) const { return std::exp(y(j)); }
    double x_min() const { return x(0); }
    double x_max() const { return x(n - 1); }
};

/// Log-uniform grid covering [x_lo, x_hi] with `anchor` sitting at fractional
/// offset `offset` inside a cell (0.5 = midway between nodes, 0 = on a node).
LogGrid aligned_grid(double x_lo, double x_hi, std::size_t n, double anchor, double offset) {
    const double y_lo = std::log(x_lo);
    const double y_hi = std::log(x_hi);
    const double y_anchor = std::log(anchor);
    const double h0 = (y_hi - y_lo) / static_cast<double>(n - 1);
    // Shift the lower end down (never up) so the anchor lands on the offset;
    // the upper end is covered because the spacing is unchanged.
    const double cells = std::ceil((y_anchor - y_lo) / h0 - offset);
    return {y_anchor - (cells + offset) * h0, h0, n};
}

/// Default domain: `width` local standard deviations of ln V(T) beyond
/// [min(V0, D), max(V0, D)] on each side. Paths leaving it below are settled in
/// default and paths leaving it above essentially never return to D.
std::pair<double, double> default_domain(double spot, double anchor, double rate, double horizon,
                                         const CevParams& params, double width) {
    const double vol = std::max(params.local_vol(spot), params.local_vol(anchor));
    const double spread = std::min(width * vol * std::sqrt(horizon), 30.0) + std::abs(rate) * horizon;
    return {std::min(spot, anchor) * std::exp(-spread), std::max(spot, anchor) * std::exp(spread)};
}

using Boundary = std::function<double(double)>;  // value as a function of time to maturity

struct BackwardProblem {
    LogGrid grid;
    double rate;
    double discount;  // zero-order coefficient (r for prices, 0 for probabilities)
    CevParams params;
    double horizon;
    std::size_t steps;
    std::size_t rannacher;
};

/// Tridiagonal system (I - theta dt L) with the Thomas factorization cached.
/// The factors are stored pre-scaled so each sweep is a single fused
/// multiply-add on the loop-carried path.
class ImplicitOperator {
public:
    ImplicitOperator(const std::vector<double>& lo, const std::vector<double>& mid,
                     const std::vector<double>& up, double theta_dt)
        : scaled_lower_(lo.size()), upper_(lo.size()), inv_pivot_(lo.size()) {
        const std::size_t m = lo.size();
        double prev_upper = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double a = -theta_dt * lo[i];
            const double b = 1.0 - theta_dt * mid[i];
            const double c = -theta_dt * up[i];
            inv_pivot_[i] = 1.0 / (b - a * prev_upper);
            scaled_lower_[i] = a * inv_pivot_[i];
            upper_[i] = c * inv_pivot_[i];
            prev_upper = upper_[i];
        }
    }

    double inv_pivot(std::size_t i) const { return inv_pivot_[i]; }
    double scaled_lower(std::size_t i) const { return scaled_lower_[i]; }

    /// Back substitution on the forward-swept right-hand side.
    void back_substitute(std::vector<double>& y) const {
        for (std::size_t i = y.size() - 1; i-- > 0;) y[i] -= upper_[i] * y[i + 1];
    }

private:
    std::vector<double> scaled_lower_;
    std::vector<double> upper_;
    std::vector<double> inv_pivot_;
};

/// Integrates u_tau = L u from tau = 0 (terminal payoff) to tau = horizon and
/// returns u on the full grid. In y = ln x the generator is
/// L u = (r - s^2 / 2) u_y + (s^2 / 2) u_yy - q u with s = delta e^{(beta - 1) y}.
std::vector<double> solve_backward(const BackwardProblem& p, std::vector<double> u,
                                   const Boundary& lower_bc, const Boundary& upper_bc) {
    const std::size_t n = p.grid.n;
    const std::size_t m = n - 2;  // interior unknowns
    const double h = p.grid.h;

    std::vector<double> lo(m), mid(m), up(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double vol = p.params.delta * std::exp((p.params.beta - 1.0) * p.grid.y(i + 1));
        const double diff = 0.5 * vol * vol / (h * h);
        const double drift = p.rate - 0.5 * vol * vol;
        const double conv = drift / (2.0 * h);
        if (diff >= std::abs(conv)) {
            lo[i] = diff - conv;
            up[i] = diff + conv;
            mid[i] = -2.0 * diff - p.discount;
        } else if (conv > 0.0) {  // upwind
            lo[i] = diff;
            up[i] = diff + 2.0 * conv;
            mid[i] = -2.0 * diff - 2.0 * conv - p.discount;
        } else {
            lo[i] = diff - 2.0 * conv;
            up[i] = diff;
            mid[i] = -2.0 * diff + 2.0 * conv - p.discount;
        }
    }

    const double dt = p.horizon / static_cast<double>(p.steps);
    // Crank-Nicolson over dt and backward Euler over dt / 2 share the same
    // left-hand matrix I - (dt / 2) L.
    const ImplicitOperator op(lo, mid, up, 0.5 * dt);

    std::vector<double> swept(m);
    // One step: build the explicit right-hand side and forward-sweep it in
    // the same pass, then back substitute.
    auto apply_step = [&](double explicit_weight, double theta_dt, double tau_new) {
        const double left = lower_bc(tau_new);
        const double right = upper_bc(tau_new);
        double prev = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double ui = u[i + 1];
            double rhs = ui + explicit_weight * (lo[i] * u[i] + mid[i] * ui + up[i] * u[i + 2]);
            if (i == 0) rhs += theta_dt * lo.front() * left;
            if (i + 1 == m) rhs += theta_dt * up.back() * right;
            prev = rhs * op.inv_pivot(i) - op.scaled_lower(i) * prev;
            swept[i] = prev;
        }
        op.back_substitute(swept);
        u.front() = left;
        u.back() = right;
        std::copy(swept.begin(), swept.end(), u.begin() + 1);
    };

    double tau = 0.0;
    for (std::size_t step = 0; step < p.steps; ++step) {
        if (step < p.rannacher) {
            // Two fully implicit half steps damp the payoff discontinuity.
            apply_step(0.0, 0.5 * dt, tau + 0.5 * dt);
            apply_step(0.0, 0.5 * dt, tau + dt);
        } else {
            apply_step(0.5 * dt, 0.5 * dt, tau + dt);
        }
        tau += dt;
    }
    return u;
}

/// Cubic Lagrange interpolation in ln x. Interpolates ln u when all four
/// neighbours are positive, which keeps relative precision in the far tail.
double interpolate(const LogGrid& g, const std::vector<double>& u, double x) {
    const double s = (std::log(x) - g.y_min) / g.h;
    auto j = static_cast<std::ptrdiff_t>(std::floor(s)) - 1;
    j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(g.n) - 4);
    const double t = s - static_cast<double>(j);
    const double w0 = (t - 1.0) * (t - 2.0) * (t - 3.0) / -6.0;
    const double w1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    const double w2 = t * (t - 1.0) * (t - 3.0) / -2.0;
    const double w3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    const double y0 = u[j], y1 = u[j + 1], y2 = u[j + 2], y3 = u[j + 3];
    if (y0 > 0.0 && y1 > 0.0 && y2 > 0.0 && y3 > 0.0 && std::max({y0, y1, y2, y3}) < 1e-3)
        return std::exp(w0 * std::log(y0) + w1 * std::log(y1) + w2 * std::log(y2) +
                        w3 * std::log(y3));
    return w0 * y0 + w1 * y1 + w2 * y2 + w3 * y3;
}

constexpr double kDomainWidth = 7.0;  // local standard deviations

LogGrid digital_grid(double asset_value, const CevParams& params, double default_point,
                     double rate, double horizon, const PdeGrid& grid) {
    auto [lo, hi] =
        default_domain(asset_value, default_point, rate, horizon, params, kDomainWidth);
    if (grid.x_min > 0.0) lo = grid.x_min;
    if (grid.x_max > 0.0) hi = grid.x_max;
    require(lo < default_point && default_point < hi,
            "PDE domain must contain the default point");
    const LogGrid g = aligned_grid(lo, hi, grid.num_space, default_point, 0.5);
    require(asset_value > g.x_min() && asset_value < g.x_max(),
            "asset_value must lie inside the PDE grid");
    return g;
}

double digital_probability(double asset_value, const CevParams& params, double default_point,
                           double rate, double horizon, const PdeGrid& grid) {
    const LogGrid g = digital_grid(asset_value, params, default_point, rate, horizon, grid);
    std::vector<double> u(g.n);
    for (std::size_t j = 0; j < g.n; ++j) u[j] = g.x(j) < default_point ? 1.0 : 0.0;

    const BackwardProblem problem{g, rate, 0.0, params, horizon, grid.num_time,
                                  grid.rannacher_steps};
    u = solve_backward(problem, std::move(u), [](double) { return 1.0; },
                       [](double) { return 0.0; });
    return std::clamp(interpolate(g, u, asset_value), 0.0, 1.0);
}

}  // namespace

ProbabilityEstimate cev_default_probability_detail(double asset_value, const CevParams& params,
                                                   double default_point, double rate,
                                                   double horizon, const PdeGrid& grid) {
    require(std::isfinite(asset_value) && asset_value > 0.0,
            "cev_default_probability: asset_value must be > 0");
    params.validate();
    grid.validate();
    require(std::isfinite(default_point) && default_point > 0.0,
            "cev_default_probability: default_point must be > 0");
    require(std::isfinite(rate), "cev_default_probability: rate must be finite");
    require(std::isfinite(horizon) && horizon > 0.0,
            "cev_default_probability: horizon must be > 0");
    require(grid.x_min < default_point, "grid x_min must lie below the default point");
    require(grid.x_max <= 0.0 || grid.x_max > default_point,
            "grid x_max must lie above the default point");

    const double coarse =
        digital_probability(asset_value, params, default_point, rate, horizon, grid);
    if (!grid.check_convergence) return {coarse, coarse, coarse, 0.0};

    PdeGrid doubled = grid;
    doubled.num_space = 2 * grid.num_space;
    doubled.num_time = 2 * grid.num_time;
    const double fine =
        digital_probability(asset_value, params, default_point, rate, horizon, doubled);
    const double change = std::abs(fine - coarse);
    if (change > grid.tolerance)
        throw GridTooCoarse("PDE probability moved by " + std::to_string(change) +
                            " under grid doubling (tolerance " + std::to_string(grid.tolerance) +
                            ")");

    // Second-order Richardson step taken on the normal-quantile scale, where
    // the discretization error stays smooth even for probabilities far in the tail.
    double extrapolated = fine;
    if (coarse > 0.0 && coarse < 1.0 && fine > 0.0 && fine < 1.0) {
        const double z_coarse = normal_quantile(coarse);
        const double z_fine = normal_quantile(fine);
        const double z = z_fine + (z_fine - z_coarse) / 3.0;
        if (std::isfinite(z)) extrapolated = normal_cdf(z);
    }
    return {extrapolated, coarse, fine, change};
}

double cev_default_probability(double asset_value, const CevParams& params, double default_point,
                               double rate, double horizon, const PdeGrid& grid) {
    return cev_default_probability_detail(asset_value, params, default_point, rate, horizon, grid)
        .probability;
}

double cev_dd(double probability) {
    require(probability >= 0.0 && probability <= 1.0, "cev_dd: probability must lie in [0, 1]");
    return -normal_quantile(probability);
}

double hagan_woodward_vol(double asset_value, double default_point, double rate, double horizon,
                          const CevParams& params) {
    require(std::isfinite(asset_value) && asset_value > 0.0,
            "hagan_woodward_vol: asset_value must be > 0");
    require(std::isfinite(default_point) && default_point > 0.0,
            "hagan_woodward_vol: default_point must be > 0");
    require(std::isfinite(horizon) && horizon >= 0.0, "hagan_woodward_vol: horizon must be >= 0");
    params.validate();

    const double forward = std::exp(rate * horizon) * asset_value;
    const double strike = default_point;
    const double f = 0.5 * (forward + strike);
    require(f > 0.0, "hagan_woodward_vol: f must be > 0");

    const double one_minus = 1.0 - params.beta;
    const double moneyness = (forward - strike) / f;
    const double leading = params.delta / std::pow(f, one_minus);
    const double skew_term = one_minus * (2.0 + params.beta) * moneyness * moneyness / 24.0;
    const double time_term = one_minus * one_minus * leading * leading * horizon / 24.0;
    return leading * (1.0 + skew_term + time_term);
}

double black_scholes_price(OptionKind kind, double spot, double strike, double rate, double vol,
                           double horizon) {
    const double call = bsm_call(spot, strike, rate, vol, horizon);
    if (kind == OptionKind::Call) return call;
    if (vol == 0.0) return std::max(strike * std::exp(-rate * horizon) - spot, 0.0);
    const auto d = bsm_d_terms(spot, strike, rate, vol, horizon);
    return strike * std::exp(-rate * horizon) * normal_cdf(-d.d2) - spot * normal_cdf(-d.d1);
}

double implied_vol(OptionKind kind, double price, double spot, double strike, double rate,
                   double horizon) {
    require(price > 0.0 && std::isfinite(price), "implied_vol: price must be > 0");
    const double discounted = strike * std::exp(-rate * horizon);
    const double intrinsic = kind == OptionKind::Call ? std::max(spot - discounted, 0.0)
                                                      : std::max(discounted - spot, 0.0);
    const double cap = kind == OptionKind::Call ? spot : discounted;
    if (!(price > intrinsic && price < cap))
        throw NoConvergence("implied_vol: price outside no-arbitrage bounds");

    // Bisection in ln sigma on ln(price); prices are monotone in sigma and the
    // log keeps deep out-of-the-money quotes well scaled.
    const double target = std::log(price - intrinsic);
    auto gap = [&](double log_vol) {
        const double model =
            black_scholes_price(kind, spot, strike, rate, std::exp(log_vol), horizon) - intrinsic;
        return model > 0.0 ? std::log(model) - target : -std::numeric_limits<double>::infinity();
    };
    double lo = std::log(1e-6), hi = std::log(10.0);
    if (gap(hi) < 0.0) throw NoConvergence("implied_vol: volatility above bracket");
    for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) < 0.0 ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

double cev_option_price(OptionKind kind, double spot, double strike, double rate, double horizon,
                        const CevParams& params, const PdeGrid& grid) {
    require(spot > 0.0 && strike > 0.0 && horizon > 0.0, "cev_option_price: invalid inputs");
    params.validate();
    grid.validate();
    auto [lo, hi] = default_domain(spot, strike, rate, horizon, params, kDomainWidth);
    if (grid.x_min > 0.0) lo = grid.x_min;
    if (grid.x_max > 0.0) hi = grid.x_max;
    const LogGrid g = aligned_grid(lo, hi, grid.num_space, strike, 0.0);

    std::vector<double> u(g.n);
    for (std::size_t j = 0; j < g.n; ++j)
        u[j] = kind == OptionKind::Call ? std::max(g.x(j) - strike, 0.0)
                                        : std::max(strike - g.x(j), 0.0);

    const BackwardProblem problem{g, rate, rate, params, horizon, grid.num_time,
                                  grid.rannacher_steps};
    const double top = g.x_max();
    const double bottom = g.x_min();
    Boundary lower, upper;
    if (kind == OptionKind::Call) {
        lower = [=](double tau) { return std::max(bottom - strike * std::exp(-rate * tau), 0.0); };
        upper = [=](double tau) { return top - strike * std::exp(-rate * tau); };
    } else {
        lower = [=](double tau) { return std::max(strike * std::exp(-rate * tau) - bottom, 0.0); };
        upper = [](double) { return 0.0; };
    }
    u = solve_backward(problem, std::move(u), lower, upper);
    return std::max(interpolate(g, u, spot), 0.0);
}

}  // namespace cevkmv
