#include "cevkmv/config.hpp"

#include "cevkmv/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace cevkmv {

std::string format_double(double x) {
    if (std::isnan(x)) return "NA";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    if (text == "NA" || text == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double value = 0.0;
    const char* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, value);
    if (text.empty() || res.ec != std::errc{} || res.ptr != end)
        throw ValidationError("not a number: '" + text + "'");
    return value;
}

namespace {

std::size_t parse_count(const std::string& key, const std::string& text) {
    std::size_t value = 0;
    const char* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, value);
    if (text.empty() || res.ec != std::errc{} || res.ptr != end)
        throw ValidationError("config " + key + ": expected a non-negative integer, got '" + text + "'");
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ValidationError("config " + key + ": expected true or false, got '" + text + "'");
}

double parse_number(const std::string& key, const std::string& text) {
    try {
        return parse_double(text);
    } catch (const ValidationError&) {
        throw ValidationError("config " + key + ": expected a number, got '" + text + "'");
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
    auto check = [](bool ok, const std::string& what) {
        if (!ok) throw ValidationError("config: " + what);
    };
    check(std::isfinite(horizon) && horizon > 0.0, "horizon must be > 0");
    check(calibration.beta_min > 0.0 && calibration.beta_min < calibration.beta_max,
          "need 0 < beta_min < beta_max");
    check(calibration.beta_min < 1.0 && 1.0 < calibration.beta_max,
          "beta range must contain 1");
    check(calibration.beta_tolerance > 0.0, "beta_tolerance must be > 0");
    check(calibration.delta_tolerance > 0.0, "delta_tolerance must be > 0");
    check(calibration.max_inner_iterations > 0, "max_inner_iterations must be > 0");
    check(max_exclusion_fraction >= 0.0 && max_exclusion_fraction <= 1.0,
          "max_exclusion_fraction must lie in [0, 1]");
    check(!output_dir.empty(), "output_dir must not be empty");
    try {
        grid.validate();
    } catch (const DomainError& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

std::vector<FitMethod> RunConfig::methods() const {
    switch (estimator) {
        case EstimatorChoice::FixedEffects: return {FitMethod::FixedEffects};
        case EstimatorChoice::EquivalentVol: return {FitMethod::EquivalentVol};
        case EstimatorChoice::Both: break;
    }
    return {FitMethod::FixedEffects, FitMethod::EquivalentVol};
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& v) {
    if (key == "horizon") c.horizon = parse_number(key, v);
    else if (key == "beta_min") c.calibration.beta_min = parse_number(key, v);
    else if (key == "beta_max") c.calibration.beta_max = parse_number(key, v);
    else if (key == "beta_tolerance") c.calibration.beta_tolerance = parse_number(key, v);
    else if (key == "delta_tolerance") c.calibration.delta_tolerance = parse_number(key, v);
    else if (key == "max_inner_iterations")
        c.calibration.max_inner_iterations = static_cast<int>(parse_count(key, v));
    else if (key == "grid_num_space") c.grid.num_space = parse_count(key, v);
    else if (key == "grid_num_time") c.grid.num_time = parse_count(key, v);
    else if (key == "grid_rannacher_steps") c.grid.rannacher_steps = parse_count(key, v);
    else if (key == "grid_tolerance") c.grid.tolerance = parse_number(key, v);
    else if (key == "grid_check_convergence") c.grid.check_convergence = parse_bool(key, v);
    else if (key == "grid_x_min") c.grid.x_min = parse_number(key, v);
    else if (key == "grid_x_max") c.grid.x_max = parse_number(key, v);
    else if (key == "estimator") {
        if (v == "fixed_effects") c.estimator = EstimatorChoice::FixedEffects;
        else if (v == "equivalent_vol") c.estimator = EstimatorChoice::EquivalentVol;
        else if (v == "both") c.estimator = EstimatorChoice::Both;
        else throw ValidationError("config estimator: expected fixed_effects, equivalent_vol or both");
    } else if (key == "fit_scope") {
        if (v == "pooled") c.fit_scope = FitScope::Pooled;
        else if (v == "per_quarter") c.fit_scope = FitScope::PerQuarter;
        else throw ValidationError("config fit_scope: expected pooled or per_quarter");
    } else if (key == "missing_policy") {
        if (v != "nearest_neighbor")
            throw ValidationError("config missing_policy: only nearest_neighbor is supported");
        c.missing_policy = MissingPolicy::NearestNeighbor;
    } else if (key == "output_dir") c.output_dir = v;
    else if (key == "max_exclusion_fraction") c.max_exclusion_fraction = parse_number(key, v);
    else if (key == "threads") c.threads = static_cast<unsigned>(parse_count(key, v));
    else throw ValidationError("config: unknown key '" + key + "'");
}

RunConfig parse_config(std::istream& in) {
    RunConfig c;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
        apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    return parse_config(in);
}

KeyValues to_key_values(const RunConfig& c) {
    const char* estimator = c.estimator == EstimatorChoice::FixedEffects    ? "fixed_effects"
                            : c.estimator == EstimatorChoice::EquivalentVol ? "equivalent_vol"
                                                                            : "both";
    return {
        {"horizon", format_double(c.horizon)},
        {"beta_min", format_double(c.calibration.beta_min)},
        {"beta_max", format_double(c.calibration.beta_max)},
        {"beta_tolerance", format_double(c.calibration.beta_tolerance)},
        {"delta_tolerance", format_double(c.calibration.delta_tolerance)},
        {"max_inner_iterations", std::to_string(c.calibration.max_inner_iterations)},
        {"grid_num_space", std::to_string(c.grid.num_space)},
        {"grid_num_time", std::to_string(c.grid.num_time)},
        {"grid_rannacher_steps", std::to_string(c.grid.rannacher_steps)},
        {"grid_tolerance", format_double(c.grid.tolerance)},
        {"grid_check_convergence", c.grid.check_convergence ? "true" : "false"},
        {"grid_x_min", format_double(c.grid.x_min)},
        {"grid_x_max", format_double(c.grid.x_max)},
        {"estimator", estimator},
        {"fit_scope", c.fit_scope == FitScope::Pooled ? "pooled" : "per_quarter"},
        {"missing_policy", "nearest_neighbor"},
        {"max_exclusion_fraction", format_double(c.max_exclusion_fraction)},
    };
}

RunConfig from_key_values(const KeyValues& kv) {
    RunConfig c;
    for (const auto& [k, v] : kv) apply_setting(c, k, v);
    c.validate();
    return c;
}

}  // namespace cevkmv
