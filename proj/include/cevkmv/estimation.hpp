#pragma once

#include "cevkmv/cev_engine.hpp"
#include "cevkmv/market_model.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace cevkmv {

struct PanelEntry {
    std::string firm_id;
    std::string quarter;
    double asset_value = 0.0;
    double asset_vol = 0.0;
    double default_point = 0.0;
    double rate = 0.0;
    double horizon = 1.0;
};

/// Inverted asset values and volatilities for one group, firm by quarter.
struct AssetPanel {
    std::vector<PanelEntry> entries;
    Group group = Group::NonST;

    /// Positive values everywhere and at least two quarters per firm.
    void validate() const;
    /// Firm ids in order of first appearance.
    std::vector<std::string> firms() const;
};

enum class FitMethod { FixedEffects, EquivalentVol };

std::string to_string(FitMethod m);
ModelTag model_tag(FitMethod m);

struct CevGroupFit {
    double beta = 1.0;
    std::map<std::string, double> deltas;
    FitMethod method = FitMethod::FixedEffects;
    double sse = 0.0;
    std::size_t n_obs = 0;
    /// Equivalent-vol only: objective at the retained point after each outer step.
    std::vector<double> objective_trace;

    double delta(const std::string& firm_id) const;
};

/// Within (fixed-effects) OLS of ln sigma_A on ln V_A:
///   beta - 1 = sum (x - xbar_i)(y - ybar_i) / sum (x - xbar_i)^2
///   ln delta_i = ybar_i - (beta - 1) xbar_i
/// Firms with no within variation in ln V_A keep their intercept but add
/// nothing to the slope. Throws NoWithinVariation if no firm varies.
CevGroupFit fit_fixed_effects(const AssetPanel& panel);

struct CalibrationSettings {
    double beta_min = 0.2;
    double beta_max = 2.0;
    double beta_tolerance = 1e-4;
    double delta_tolerance = 1e-8;  // on ln delta
    int max_inner_iterations = 100;
};

/// Least squares in log-vol space between the inverted asset volatilities and
/// hagan_woodward_vol, over a common beta and one delta per firm.
/// Golden-section search on beta with an inner Newton solve per firm.
/// Throws CalibrationDiverged when the search ends on either end of the range.
CevGroupFit fit_equivalent_vol(const AssetPanel& panel, const CalibrationSettings& settings = {});

/// Sum of squared log-vol residuals at a given beta with every delta profiled out.
/// Fills `deltas` when non-null.
double equivalent_vol_objective(const AssetPanel& panel, double beta,
                                const CalibrationSettings& settings = {},
                                std::map<std::string, double>* deltas = nullptr);

/// CEV probability and distance to default for every entry under the fit.
/// A zero default point gives probability 0 and infinite distance.
std::vector<DefaultDistanceRecord> dd_panel(const AssetPanel& panel, const CevGroupFit& fit,
                                            const PdeGrid& grid = {});

}  // namespace cevkmv
