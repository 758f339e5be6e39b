#pragma once

#include "cevkmv/cev_engine.hpp"
#include "cevkmv/estimation.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace cevkmv {

enum class EstimatorChoice { FixedEffects, EquivalentVol, Both };
enum class FitScope { Pooled, PerQuarter };
enum class MissingPolicy { NearestNeighbor };

struct RunConfig {
    double horizon = 1.0;
    CalibrationSettings calibration;
    PdeGrid grid;
    EstimatorChoice estimator = EstimatorChoice::Both;
    /// PerQuarter fits quarter t on quarters 1..max(t, 2) of the sample.
    FitScope fit_scope = FitScope::Pooled;
    MissingPolicy missing_policy = MissingPolicy::NearestNeighbor;
    std::string output_dir = "study_out";
    double max_exclusion_fraction = 0.10;
    /// Worker threads for per-firm work; 0 picks the hardware count. Never
    /// changes results.
    unsigned threads = 1;

    /// Throws ValidationError.
    void validate() const;
    std::vector<FitMethod> methods() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Sets one key; throws ValidationError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Flat `key = value` lines; blank lines and `#` comments are skipped.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// Every result-affecting setting in a fixed order, values printed to round trip.
/// `threads` and `output_dir` are left out: neither changes results.
KeyValues to_key_values(const RunConfig& config);
RunConfig from_key_values(const KeyValues& kv);

/// Shortest decimal text that reads back to the same double ("inf", "-inf", "NA" for NaN).
std::string format_double(double x);
double parse_double(const std::string& text);

}  // namespace cevkmv
