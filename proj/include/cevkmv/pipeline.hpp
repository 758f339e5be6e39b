#pragma once

#include "cevkmv/config.hpp"
#include "cevkmv/estimation.hpp"
#include "cevkmv/inputs.hpp"

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cevkmv {

constexpr std::size_t kVolWindow = 250;

/// Annualised sample standard deviation of the last 250 returns dated
/// strictly before `as_of`:
///   sqrt( (250 / 249) * sum (r_s - rbar)^2 ).
/// `returns` must be sorted by date. Throws InsufficientHistory.
double estimate_equity_vol(std::span<const DailyReturn> returns, Date as_of);

/// Short-term debt plus half the long-term debt.
double default_point(double short_term_debt, double long_term_debt);

/// Fills each gap with the value at the nearest observed position; ties go to
/// the earlier one. `positions` are the time coordinates (e.g. quarter
/// indices) of `values`, ascending. `source` receives the position index each
/// output came from. Throws AllMissing when nothing is observed.
std::vector<double> fill_nearest(const std::vector<std::optional<double>>& values,
                                 const std::vector<int>& positions,
                                 std::vector<std::size_t>* source = nullptr);

struct FillRecord {
    std::string firm_id;
    std::string quarter;
    std::string field;
    std::string source_quarter;
};

struct FilledFundamentals {
    std::vector<FundamentalsRow> rows;  // every optional engaged
    std::vector<FillRecord> fills;
};

/// Per firm and field, nearest-quarter filling. AllMissing names the firm and field.
FilledFundamentals fill_missing(const std::vector<FundamentalsRow>& rows);

/// Structural checks shared by the CLI and run_study. Throws ValidationError.
void validate_inputs(const RawInputs& inputs);

struct AssetRow {
    std::string firm_id;
    std::string quarter;
    Group group = Group::NonST;
    double equity_value = 0.0;
    double equity_vol = 0.0;
    double default_point = 0.0;
    double rate = 0.0;
    double horizon = 1.0;
    double asset_value = 0.0;
    double asset_vol = 0.0;
    double classical_dd = 0.0;
};

struct Exclusion {
    std::string firm_id;
    Group group = Group::NonST;
    std::string stage;   // volatility, inversion, probability, fill
    std::string reason;  // error text
    std::size_t firm_quarters = 0;
};

struct FitRecord {
    Group group = Group::NonST;
    /// "pooled", or the quarter the fit serves under per-quarter scope.
    std::string scope;
    CevGroupFit fit;
};

struct GroupedRecord {
    DefaultDistanceRecord record;
    Group group = Group::NonST;
};

/// Everything a study run produces; reports are views of this.
struct StudyResult {
    RunConfig config;
    std::vector<std::string> quarters;
    std::size_t input_firm_quarters = 0;
    std::map<std::string, Group> firm_groups;  // every firm in the input
    std::vector<AssetRow> assets;              // surviving firms only
    std::vector<FitRecord> fits;
    std::vector<GroupedRecord> records;  // classical first, then each configured method
    std::vector<Exclusion> exclusions;
    std::vector<FillRecord> fills;

    std::vector<ModelTag> models() const;
};

/// Runs the whole study. Per-firm failures are logged to `log` (if given)
/// and the firm is excluded; more than config.max_exclusion_fraction of a
/// group excluded throws ExclusionThresholdBreached.
StudyResult run_study(const RawInputs& inputs, const RunConfig& config, std::ostream* log = nullptr);

}  // namespace cevkmv
