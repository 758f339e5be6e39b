#include "cevkmv/market_model.hpp"

#include "cevkmv/errors.hpp"
#include "cevkmv/normal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace cevkmv {

using detail::require;

std::string to_string(Group g) {
    return g == Group::ST ? "ST" : "NonST";
}

Group parse_group(const std::string& text) {
    if (text == "ST") return Group::ST;
    if (text == "NonST" || text == "NST" || text == "Non ST") return Group::NonST;
    throw ValidationError("unknown group label '" + text + "'");
}

void FirmQuarterObservation::validate() const {
    require(std::isfinite(equity_value) && equity_value > 0.0,
            "equity_value must be finite and > 0");
    require(std::isfinite(equity_vol) && equity_vol > 0.0, "equity_vol must be finite and > 0");
    require(std::isfinite(default_point) && default_point >= 0.0,
            "default_point must be finite and >= 0");
    require(std::isfinite(rate), "rate must be finite");
    require(std::isfinite(horizon) && horizon > 0.0, "horizon must be finite and > 0");
}

DTerms bsm_d_terms(double asset_value, double default_point, double rate, double vol,
                   double horizon) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (default_point == 0.0) return {inf, inf};
    const double s = vol * std::sqrt(horizon);
    const double d2 = (std::log(asset_value / default_point) + (rate - 0.5 * vol * vol) * horizon) / s;
    return {d2 + s, d2};
}

double bsm_call(double asset_value, double default_point, double rate, double vol,
                double horizon) {
    require(std::isfinite(asset_value) && asset_value > 0.0, "bsm_call: asset_value must be > 0");
    require(std::isfinite(default_point) && default_point >= 0.0,
            "bsm_call: default_point must be >= 0");
    require(std::isfinite(rate), "bsm_call: rate must be finite");
    require(std::isfinite(vol) && vol >= 0.0, "bsm_call: vol must be >= 0");
    require(std::isfinite(horizon) && horizon > 0.0, "bsm_call: horizon must be > 0");

    if (default_point == 0.0) return asset_value;
    const double discounted = std::exp(-rate * horizon) * default_point;
    if (vol == 0.0) return std::max(asset_value - discounted, 0.0);

    const auto [d1, d2] = bsm_d_terms(asset_value, default_point, rate, vol, horizon);
    const double value = asset_value * normal_cdf(d1) - discounted * normal_cdf(d2);
    return std::clamp(value, std::max(asset_value - discounted, 0.0), asset_value);
}

double kmv_equity_vol(double asset_value, double equity_value, double asset_vol, double d1) {
    require(std::isfinite(equity_value) && equity_value > 0.0,
            "kmv_equity_vol: equity_value must be > 0");
    if (asset_vol == 0.0) return 0.0;
    return asset_vol * (asset_value / equity_value) * normal_cdf(d1);
}

EquityView kmv_forward(double asset_value, double asset_vol, double default_point, double rate,
                       double horizon) {
    const double equity = bsm_call(asset_value, default_point, rate, asset_vol, horizon);
    const auto d = bsm_d_terms(asset_value, default_point, rate, asset_vol, horizon);
    return {equity, kmv_equity_vol(asset_value, equity, asset_vol, d.d1)};
}

namespace {

struct Residual {
    double price;  // C / V_E - 1
    double vol;    // sigma V N(d1) / (sigma_E V_E) - 1
    double norm() const { return std::max(std::abs(price), std::abs(vol)); }
};

Residual residual(const FirmQuarterObservation& obs, double v, double s) {
    const auto d = bsm_d_terms(v, obs.default_point, obs.rate, s, obs.horizon);
    const double call = v * normal_cdf(d.d1) -
                        std::exp(-obs.rate * obs.horizon) * obs.default_point * normal_cdf(d.d2);
    return {call / obs.equity_value - 1.0,
            s * v * normal_cdf(d.d1) / (obs.equity_vol * obs.equity_value) - 1.0};
}

/// Nested bisection: inner solve for V at fixed sigma from the price
/// equation, outer bisection on ln sigma for the volatility equation.
AssetSolution bisection_fallback(const FirmQuarterObservation& obs, double tolerance) {
    const double discounted = std::exp(-obs.rate * obs.horizon) * obs.default_point;
    int evaluations = 0;

    auto asset_for_vol = [&](double s) {
        double lo = obs.equity_value;
        double hi = obs.equity_value + discounted;
        for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            ++evaluations;
            if (bsm_call(mid, obs.default_point, obs.rate, s, obs.horizon) < obs.equity_value)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    };
    auto vol_gap = [&](double s) {
        const double v = asset_for_vol(s);
        const auto d = bsm_d_terms(v, obs.default_point, obs.rate, s, obs.horizon);
        return s * v * normal_cdf(d.d1) - obs.equity_vol * obs.equity_value;
    };

    double lo = std::log(1e-8);
    double hi = std::log(std::max(obs.equity_vol, 1e-3));
    while (vol_gap(std::exp(hi)) < 0.0) {
        hi += std::log(2.0);
        if (hi > std::log(1e3)) throw NoConvergence("invert_kmv: cannot bracket asset volatility");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (vol_gap(std::exp(mid)) < 0.0 ? lo : hi) = mid;
    }
    const double s = std::exp(0.5 * (lo + hi));
    const double v = asset_for_vol(s);
    const double norm = residual(obs, v, s).norm();
    if (!(norm <= tolerance))
        throw NoConvergence("invert_kmv: bisection fallback residual " + std::to_string(norm));
    return {v, s, norm, evaluations, false};
}

}  // namespace

AssetSolution invert_kmv(const FirmQuarterObservation& obs, const InversionSettings& settings) {
    obs.validate();
    if (obs.default_point == 0.0) return {obs.equity_value, obs.equity_vol, 0.0, 0, true};

    const double discounted = std::exp(-obs.rate * obs.horizon) * obs.default_point;
    const double sqrt_t = std::sqrt(obs.horizon);

    double log_v = std::log(obs.equity_value + discounted);
    double log_s = std::log(obs.equity_vol * obs.equity_value / std::exp(log_v));
    Residual res = residual(obs, std::exp(log_v), std::exp(log_s));

    for (int iter = 1; iter <= settings.max_iterations; ++iter) {
        if (res.norm() <= settings.tolerance)
            return {std::exp(log_v), std::exp(log_s), res.norm(), iter - 1, false};

        const double v = std::exp(log_v);
        const double s = std::exp(log_s);
        const auto d = bsm_d_terms(v, obs.default_point, obs.rate, s, obs.horizon);
        const double nd1 = normal_cdf(d.d1);
        const double pd1 = normal_pdf(d.d1);
        const double scale_vol = obs.equity_vol * obs.equity_value;

        // Jacobian with respect to (ln V, ln sigma).
        const double j11 = v * nd1 / obs.equity_value;
        const double j12 = s * v * pd1 * sqrt_t / obs.equity_value;
        const double j21 = v * (s * nd1 + pd1 / sqrt_t) / scale_vol;
        const double j22 = s * v * (nd1 - pd1 * d.d2) / scale_vol;
        const double det = j11 * j22 - j12 * j21;
        if (!std::isfinite(det) || det == 0.0) break;

        const double step_v = -(j22 * res.price - j12 * res.vol) / det;
        const double step_s = -(-j21 * res.price + j11 * res.vol) / det;

        double damping = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30; ++k) {
            const double cand_v = log_v + damping * step_v;
            const double cand_s = log_s + damping * step_s;
            const Residual cand = residual(obs, std::exp(cand_v), std::exp(cand_s));
            if (std::isfinite(cand.norm()) && cand.norm() < res.norm()) {
                log_v = cand_v;
                log_s = cand_s;
                res = cand;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if (!accepted) break;
    }
    if (res.norm() <= settings.tolerance)
        return {std::exp(log_v), std::exp(log_s), res.norm(), settings.max_iterations, false};

    return bisection_fallback(obs, settings.tolerance);
}

double classical_dd(double asset_value, double asset_vol, double default_point, double rate,
                    double horizon) {
    require(std::isfinite(asset_value) && asset_value > 0.0, "classical_dd: asset_value must be > 0");
    require(std::isfinite(asset_vol) && asset_vol > 0.0, "classical_dd: asset_vol must be > 0");
    require(std::isfinite(default_point) && default_point >= 0.0,
            "classical_dd: default_point must be >= 0");
    require(std::isfinite(horizon) && horizon > 0.0, "classical_dd: horizon must be > 0");
    return bsm_d_terms(asset_value, default_point, rate, asset_vol, horizon).d2;
}

double classical_dd(const AssetSolution& solution, const FirmQuarterObservation& obs) {
    return classical_dd(solution.asset_value, solution.asset_vol, obs.default_point, obs.rate,
                        obs.horizon);
}

}  // namespace cevkmv
