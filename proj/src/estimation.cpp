#include "cevkmv/estimation.hpp"

#include "cevkmv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace cevkmv {

using detail::require;

void AssetPanel::validate() const {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& e : entries) {
        require(std::isfinite(e.asset_value) && e.asset_value > 0.0,
                "panel: asset_value must be > 0 (firm " + e.firm_id + ")");
        require(std::isfinite(e.asset_vol) && e.asset_vol > 0.0,
                "panel: asset_vol must be > 0 (firm " + e.firm_id + ")");
        require(std::isfinite(e.default_point) && e.default_point >= 0.0,
                "panel: default_point must be >= 0 (firm " + e.firm_id + ")");
        require(std::isfinite(e.rate), "panel: rate must be finite");
        require(std::isfinite(e.horizon) && e.horizon > 0.0, "panel: horizon must be > 0");
        ++counts[e.firm_id];
    }
    for (const auto& [firm, n] : counts)
        require(n >= 2, "panel: firm " + firm + " has fewer than 2 quarters");
}

std::vector<std::string> AssetPanel::firms() const {
    std::vector<std::string> out;
    std::unordered_map<std::string, bool> seen;
    for (const auto& e : entries)
        if (!seen[e.firm_id]) {
            seen[e.firm_id] = true;
            out.push_back(e.firm_id);
        }
    return out;
}

std::string to_string(FitMethod m) {
    return m == FitMethod::FixedEffects ? "FixedEffects" : "EquivalentVol";
}

ModelTag model_tag(FitMethod m) {
    return m == FitMethod::FixedEffects ? ModelTag::CevKmvFE : ModelTag::CevKmvEV;
}

double CevGroupFit::delta(const std::string& firm_id) const {
    const auto it = deltas.find(firm_id);
    if (it == deltas.end()) throw DomainError("fit has no delta for firm " + firm_id);
    return it->second;
}

namespace {

// Entry indices grouped by firm, firms in order of first appearance.
std::vector<std::vector<std::size_t>> group_by_firm(const AssetPanel& panel,
                                                    std::vector<std::string>& ids) {
    ids = panel.firms();
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t k = 0; k < ids.size(); ++k) slot[ids[k]] = k;
    std::vector<std::vector<std::size_t>> rows(ids.size());
    for (std::size_t j = 0; j < panel.entries.size(); ++j)
        rows[slot[panel.entries[j].firm_id]].push_back(j);
    return rows;
}

}  // namespace

CevGroupFit fit_fixed_effects(const AssetPanel& panel) {
    panel.validate();
    std::vector<std::string> ids;
    const auto rows = group_by_firm(panel, ids);

    std::vector<double> xbar(ids.size()), ybar(ids.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& r = rows[i];
        double sx = 0.0, sy = 0.0;
        bool varies = false;
        const double x0 = std::log(panel.entries[r.front()].asset_value);
        for (std::size_t j : r) {
            const double x = std::log(panel.entries[j].asset_value);
            sx += x;
            sy += std::log(panel.entries[j].asset_vol);
            varies = varies || x != x0;
        }
        xbar[i] = sx / r.size();
        ybar[i] = sy / r.size();
        if (!varies) continue;
        for (std::size_t j : r) {
            const double dx = std::log(panel.entries[j].asset_value) - xbar[i];
            const double dy = std::log(panel.entries[j].asset_vol) - ybar[i];
            sxy += dx * dy;
            sxx += dx * dx;
        }
    }
    if (sxx == 0.0) throw NoWithinVariation("fixed effects: no within-firm variation in ln V_A");

    CevGroupFit fit;
    fit.method = FitMethod::FixedEffects;
    const double slope = sxy / sxx;
    fit.beta = 1.0 + slope;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const double log_delta = ybar[i] - slope * xbar[i];
        fit.deltas[ids[i]] = std::exp(log_delta);
        for (std::size_t j : rows[i]) {
            const double e = std::log(panel.entries[j].asset_vol) - log_delta -
                             slope * std::log(panel.entries[j].asset_value);
            fit.sse += e * e;
        }
    }
    fit.n_obs = panel.entries.size();
    return fit;
}

namespace {

// ln hagan_woodward_vol = u - c + ln(1 + a + b e^{2u}) with u = ln delta.
struct ExpansionTerms {
    double target;  // ln sigma_A
    double c;
    double a;
    double b;
};

ExpansionTerms expansion_terms(const PanelEntry& e, double beta) {
    require(e.default_point > 0.0,
            "equivalent vol: default_point must be > 0 (firm " + e.firm_id + ")");
    const double forward = std::exp(e.rate * e.horizon) * e.asset_value;
    const double f = 0.5 * (forward + e.default_point);
    const double one_minus = 1.0 - beta;
    const double m = (forward - e.default_point) / f;
    return {std::log(e.asset_vol), one_minus * std::log(f),
            one_minus * (2.0 + beta) * m * m / 24.0,
            one_minus * one_minus * e.horizon / (24.0 * std::pow(f, 2.0 * one_minus))};
}

double firm_sse(const std::vector<ExpansionTerms>& terms, double u) {
    double s = 0.0;
    const double w = std::exp(2.0 * u);
    for (const auto& t : terms) {
        const double inner = 1.0 + t.a + t.b * w;
        if (!(inner > 0.0)) return std::numeric_limits<double>::infinity();
        const double e = t.target - (u - t.c + std::log(inner));
        s += e * e;
    }
    return s;
}

// 1-D Newton on ln delta for one firm, started from the leading-order closed form.
double solve_log_delta(const std::vector<ExpansionTerms>& terms, const CalibrationSettings& cfg,
                       const std::string& firm) {
    double u = 0.0;
    for (const auto& t : terms) u += t.target + t.c;
    u /= static_cast<double>(terms.size());
    double g = firm_sse(terms, u);

    for (int it = 0; it < cfg.max_inner_iterations; ++it) {
        const double w = std::exp(2.0 * u);
        double grad = 0.0, hess = 0.0, gauss = 0.0;
        for (const auto& t : terms) {
            const double inner = 1.0 + t.a + t.b * w;
            const double e = t.target - (u - t.c + std::log(inner));
            const double s = 1.0 + 2.0 * t.b * w / inner;
            const double ds = 4.0 * t.b * w * (1.0 + t.a) / (inner * inner);
            grad += -e * s;
            hess += s * s - e * ds;
            gauss += s * s;
        }
        const double step = -grad / (hess > 0.0 ? hess : gauss);
        if (std::abs(step) <= cfg.delta_tolerance) return u + step;

        double lambda = 1.0;
        bool moved = false;
        for (int k = 0; k < 40; ++k) {
            const double cand = firm_sse(terms, u + lambda * step);
            if (cand <= g) {
                u += lambda * step;
                g = cand;
                moved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!moved) return u;
    }
    throw NoConvergence("equivalent vol: delta solve did not converge for firm " + firm);
}

}  // namespace

double equivalent_vol_objective(const AssetPanel& panel, double beta,
                                const CalibrationSettings& settings,
                                std::map<std::string, double>* deltas) {
    std::vector<std::string> ids;
    const auto rows = group_by_firm(panel, ids);
    double total = 0.0;
    std::vector<ExpansionTerms> terms;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        terms.clear();
        for (std::size_t j : rows[i]) terms.push_back(expansion_terms(panel.entries[j], beta));
        const double u = solve_log_delta(terms, settings, ids[i]);
        total += firm_sse(terms, u);
        if (deltas) (*deltas)[ids[i]] = std::exp(u);
    }
    return total;
}

CevGroupFit fit_equivalent_vol(const AssetPanel& panel, const CalibrationSettings& settings) {
    panel.validate();
    require(settings.beta_min > 0.0 && settings.beta_min < settings.beta_max,
            "calibration: need 0 < beta_min < beta_max");
    require(settings.beta_tolerance > 0.0, "calibration: beta_tolerance must be > 0");

    CevGroupFit fit;
    fit.method = FitMethod::EquivalentVol;

    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = settings.beta_min;
    double hi = settings.beta_max;
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = equivalent_vol_objective(panel, x1, settings);
    double f2 = equivalent_vol_objective(panel, x2, settings);
    fit.objective_trace.push_back(std::min(f1, f2));

    while (hi - lo > settings.beta_tolerance) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = equivalent_vol_objective(panel, x1, settings);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = equivalent_vol_objective(panel, x2, settings);
        }
        fit.objective_trace.push_back(std::min(f1, f2));
    }

    const double beta = f1 <= f2 ? x1 : x2;
    if (beta - settings.beta_min <= settings.beta_tolerance ||
        settings.beta_max - beta <= settings.beta_tolerance)
        throw CalibrationDiverged("calibration: beta search ended at the boundary (" +
                                  std::to_string(beta) + ")");

    fit.beta = beta;
    fit.sse = equivalent_vol_objective(panel, beta, settings, &fit.deltas);
    fit.n_obs = panel.entries.size();
    return fit;
}

std::vector<DefaultDistanceRecord> dd_panel(const AssetPanel& panel, const CevGroupFit& fit,
                                            const PdeGrid& grid) {
    std::vector<DefaultDistanceRecord> out;
    out.reserve(panel.entries.size());
    for (const auto& e : panel.entries) {
        DefaultDistanceRecord rec{e.firm_id, e.quarter, model_tag(fit.method), 0.0,
                                  std::numeric_limits<double>::infinity()};
        if (e.default_point > 0.0) {
            const CevParams params{fit.delta(e.firm_id), fit.beta};
            rec.probability = cev_default_probability(e.asset_value, params, e.default_point,
                                                      e.rate, e.horizon, grid);
            rec.distance = cev_dd(rec.probability);
        }
        out.push_back(rec);
    }
    return out;
}

}  // namespace cevkmv
