#pragma once

#include <cstddef>
#include <string>

namespace cevkmv {

enum class Group { ST, NonST };

std::string to_string(Group g);
Group parse_group(const std::string& text);

/// One firm-quarter row of observed equity data.
struct FirmQuarterObservation {
    std::string firm_id;
    std::string quarter;
    double equity_value = 0.0;   // V_E
    double equity_vol = 0.0;     // sigma_E, annualized
    double default_point = 0.0;  // D
    double rate = 0.0;           // continuously compounded
    double horizon = 1.0;        // years
    Group group = Group::NonST;

    /// Throws DomainError when a field breaks its invariant.
    void validate() const;
};

/// Asset value and asset volatility implied by observed equity data under GBM.
struct AssetSolution {
    double asset_value = 0.0;
    double asset_vol = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
    /// Zero default point: the firm is all equity and the inversion is trivial.
    bool degenerate = false;
};

/// Black-Scholes-Merton d1 and d2 for the equity-as-call mapping.
struct DTerms {
    double d1;
    double d2;
};

DTerms bsm_d_terms(double asset_value, double default_point, double rate, double vol,
                   double horizon);

/// Equity as a European call on firm assets struck at the default point.
double bsm_call(double asset_value, double default_point, double rate, double vol,
                double horizon);

/// Equity volatility implied by asset volatility: sigma_A * (V_A / V_E) * N(d1).
double kmv_equity_vol(double asset_value, double equity_value, double asset_vol, double d1);

/// Forward map (V_A, sigma_A) -> (V_E, sigma_E).
struct EquityView {
    double equity_value;
    double equity_vol;
};

EquityView kmv_forward(double asset_value, double asset_vol, double default_point,
                       double rate, double horizon);

struct InversionSettings {
    double tolerance = 1e-10;  // relative residual on both equations
    int max_iterations = 100;
};

/// Recover (V_A, sigma_A) from (V_E, sigma_E) by solving the call-price and
/// equity-volatility equations jointly.
///
/// Damped Newton on (ln V_A, ln sigma_A) starting from
/// V_A = V_E + D e^{-rT}, sigma_A = sigma_E V_E / V_A, with nested bisection
/// as the fallback when the Newton step stops reducing the residual.
/// A zero default point returns (V_E, sigma_E) flagged as degenerate.
/// Throws NoConvergence if neither route meets the tolerance.
AssetSolution invert_kmv(const FirmQuarterObservation& obs,
                         const InversionSettings& settings = {});

/// Classical distance to default d2. +inf when the default point is zero.
double classical_dd(const AssetSolution& solution, const FirmQuarterObservation& obs);

/// d2 computed directly from asset-side quantities.
double classical_dd(double asset_value, double asset_vol, double default_point, double rate,
                    double horizon);

}  // namespace cevkmv
