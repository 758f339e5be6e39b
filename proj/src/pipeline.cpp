#include "cevkmv/pipeline.hpp"

#include "cevkmv/errors.hpp"
#include "cevkmv/normal.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <ostream>
#include <set>
#include <thread>

namespace cevkmv {

double estimate_equity_vol(std::span<const DailyReturn> returns, Date as_of) {
    const auto end = std::lower_bound(
        returns.begin(), returns.end(), as_of,
        [](const DailyReturn& r, Date d) { return r.date < d; });
    const auto available = static_cast<std::size_t>(end - returns.begin());
    if (available < kVolWindow)
        throw InsufficientHistory("need " + std::to_string(kVolWindow) + " returns before " +
                                  format_date(as_of) + ", have " + std::to_string(available));
    const auto begin = end - kVolWindow;
    double mean = 0.0;
    for (auto it = begin; it != end; ++it) mean += it->value;
    mean /= static_cast<double>(kVolWindow);
    double ss = 0.0;
    for (auto it = begin; it != end; ++it) ss += (it->value - mean) * (it->value - mean);
    return std::sqrt(250.0 / 249.0 * ss);
}

double default_point(double short_term_debt, double long_term_debt) {
    detail::require(short_term_debt >= 0.0 && long_term_debt >= 0.0,
                    "default_point: debts must be >= 0");
    return short_term_debt + 0.5 * long_term_debt;
}

std::vector<double> fill_nearest(const std::vector<std::optional<double>>& values,
                                 const std::vector<int>& positions,
                                 std::vector<std::size_t>* source) {
    detail::require(values.size() == positions.size(), "fill_nearest: size mismatch");
    std::vector<std::size_t> observed;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i]) observed.push_back(i);
    if (observed.empty()) throw AllMissing("no observed value to fill from");

    std::vector<double> out(values.size());
    if (source) source->assign(values.size(), 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::size_t best = observed.front();
        for (std::size_t k : observed)
            if (std::abs(positions[k] - positions[i]) < std::abs(positions[best] - positions[i]))
                best = k;  // strict: an equal distance keeps the earlier one
        out[i] = *values[best];
        if (source) (*source)[i] = best;
    }
    return out;
}

FilledFundamentals fill_missing(const std::vector<FundamentalsRow>& rows) {
    std::map<std::string, std::vector<std::size_t>> by_firm;
    for (std::size_t i = 0; i < rows.size(); ++i) by_firm[rows[i].firm_id].push_back(i);

    FilledFundamentals out;
    out.rows = rows;
    using Field = std::optional<double> FundamentalsRow::*;
    const std::pair<const char*, Field> fields[] = {{"equity_value", &FundamentalsRow::equity_value},
                                                    {"std_debt", &FundamentalsRow::std_debt},
                                                    {"ltd_debt", &FundamentalsRow::ltd_debt}};
    for (auto& [firm, idx] : by_firm) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return parse_quarter(rows[a].quarter) < parse_quarter(rows[b].quarter);
        });
        const Quarter origin = parse_quarter(rows[idx.front()].quarter);
        std::vector<int> pos;
        for (std::size_t i : idx) pos.push_back(quarters_between(origin, parse_quarter(rows[i].quarter)));

        for (const auto& [name, member] : fields) {
            std::vector<std::optional<double>> values;
            for (std::size_t i : idx) values.push_back(rows[i].*member);
            std::vector<std::size_t> src;
            std::vector<double> filled;
            try {
                filled = fill_nearest(values, pos, &src);
            } catch (const AllMissing&) {
                throw AllMissing("firm " + firm + " has no observed " + name);
            }
            for (std::size_t k = 0; k < idx.size(); ++k) {
                out.rows[idx[k]].*member = filled[k];
                if (!values[k])
                    out.fills.push_back({firm, rows[idx[k]].quarter, name, rows[idx[src[k]]].quarter});
            }
        }
    }
    std::sort(out.fills.begin(), out.fills.end(), [](const FillRecord& a, const FillRecord& b) {
        return std::tie(a.firm_id, a.quarter, a.field) < std::tie(b.firm_id, b.quarter, b.field);
    });
    return out;
}

void validate_inputs(const RawInputs& in) {
    if (in.fundamentals.empty()) throw ValidationError("fundamentals: no rows");
    std::set<std::pair<std::string, std::string>> seen;
    std::map<std::string, Group> groups;
    for (const auto& f : in.fundamentals) {
        if (f.firm_id.empty()) throw ValidationError("fundamentals: empty firm_id");
        const std::string q = to_string(parse_quarter(f.quarter));
        if (q != f.quarter) throw ValidationError("fundamentals: quarter '" + f.quarter + "' not canonical");
        if (!seen.insert({f.firm_id, f.quarter}).second)
            throw ValidationError("fundamentals: duplicate row for " + f.firm_id + " " + f.quarter);
        const auto [it, fresh] = groups.emplace(f.firm_id, f.group);
        if (!fresh && it->second != f.group)
            throw ValidationError("fundamentals: firm " + f.firm_id + " changes group");
        for (const auto& v : {f.equity_value, f.std_debt, f.ltd_debt})
            if (v && !(std::isfinite(*v) && *v >= 0.0))
                throw ValidationError("fundamentals: negative or non-finite value for " + f.firm_id);
        if (f.equity_value && *f.equity_value == 0.0)
            throw ValidationError("fundamentals: zero equity_value for " + f.firm_id + " " + f.quarter);
        const auto rate = in.rates.find(f.quarter);
        if (rate == in.rates.end()) throw ValidationError("rates: no rate for quarter " + f.quarter);
        if (!std::isfinite(rate->second)) throw ValidationError("rates: non-finite rate for " + f.quarter);
    }
    for (const auto& [firm, series] : in.daily_returns)
        for (std::size_t k = 0; k < series.size(); ++k) {
            if (!(std::isfinite(series[k].value) && series[k].value > -1.0))
                throw ValidationError("returns: invalid return for " + firm + " on " +
                                      format_date(series[k].date));
            if (k > 0 && !(series[k - 1].date < series[k].date))
                throw ValidationError("returns: dates for " + firm + " not strictly increasing");
        }
}

std::vector<ModelTag> StudyResult::models() const {
    std::vector<ModelTag> out{ModelTag::ClassicalKMV};
    for (FitMethod m : config.methods()) out.push_back(model_tag(m));
    return out;
}

namespace {

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) fn(i);
        });
    for (auto& th : pool) th.join();
}

struct FirmWork {
    std::string firm_id;
    Group group = Group::NonST;
    std::vector<FundamentalsRow> rows;  // sorted by quarter, filled
    std::vector<AssetRow> assets;
    std::optional<Exclusion> exclusion;
};

class Study {
public:
    Study(const RawInputs& in, const RunConfig& config, std::ostream* log)
        : in_(in), log_(log) {
        result_.config = config;
    }

    StudyResult run() {
        collect();
        invert();
        check_threshold();
        fit();
        check_threshold();
        distances();
        check_threshold();
        finish();
        return std::move(result_);
    }

private:
    void exclude(FirmWork& f, const std::string& stage, const std::string& reason) {
        if (f.exclusion) return;
        f.exclusion = Exclusion{f.firm_id, f.group, stage, reason, f.rows.size()};
    }

    void flush_exclusions() {
        for (auto& f : firms_)
            if (f.exclusion && !logged_.count(f.firm_id)) {
                logged_.insert(f.firm_id);
                if (log_)
                    *log_ << "excluded " << f.firm_id << " (" << to_string(f.group) << ") at "
                          << f.exclusion->stage << ": " << f.exclusion->reason << '\n';
            }
    }

    void collect() {
        std::set<Quarter> quarters;
        for (const auto& r : in_.fundamentals) {
            quarters.insert(parse_quarter(r.quarter));
            result_.firm_groups[r.firm_id] = r.group;
        }
        for (const auto& q : quarters) result_.quarters.push_back(to_string(q));
        result_.input_firm_quarters = in_.fundamentals.size();

        std::map<std::string, std::vector<FundamentalsRow>> by_firm;
        for (const auto& r : in_.fundamentals) by_firm[r.firm_id].push_back(r);
        for (auto& [firm, rows] : by_firm) {
            FirmWork w;
            w.firm_id = firm;
            w.group = rows.front().group;
            std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
                return parse_quarter(a.quarter) < parse_quarter(b.quarter);
            });
            w.rows = rows;
            try {
                auto filled = fill_missing(rows);
                w.rows = std::move(filled.rows);
                result_.fills.insert(result_.fills.end(), filled.fills.begin(), filled.fills.end());
            } catch (const AllMissing& e) {
                exclude(w, "fill", e.what());
            }
            if (!w.exclusion && w.rows.size() < 2)
                exclude(w, "estimation", "fewer than 2 quarters");
            firms_.push_back(std::move(w));
        }
    }

    void invert() {
        const double horizon = result_.config.horizon;
        parallel_for(firms_.size(), result_.config.threads, [&](std::size_t i) {
            FirmWork& f = firms_[i];
            if (f.exclusion) return;
            const auto series_it = in_.daily_returns.find(f.firm_id);
            const std::vector<DailyReturn> none;
            const auto& series = series_it == in_.daily_returns.end() ? none : series_it->second;
            for (const auto& row : f.rows) {
                const Date end = quarter_end(parse_quarter(row.quarter));
                const auto after = std::upper_bound(
                    series.begin(), series.end(), end,
                    [](Date d, const DailyReturn& r) { return d < r.date; });
                if (after == series.begin()) {
                    exclude(f, "volatility", "no trading date on or before " + format_date(end));
                    return;
                }
                const Date as_of = std::prev(after)->date;
                AssetRow a;
                a.firm_id = f.firm_id;
                a.quarter = row.quarter;
                a.group = f.group;
                a.equity_value = *row.equity_value;
                a.default_point = default_point(*row.std_debt, *row.ltd_debt);
                a.rate = in_.rates.at(row.quarter);
                a.horizon = horizon;
                try {
                    a.equity_vol = estimate_equity_vol(series, as_of);
                } catch (const InsufficientHistory& e) {
                    exclude(f, "volatility", row.quarter + ": " + e.what());
                    return;
                }
                if (a.default_point <= 0.0) {
                    exclude(f, "inversion", row.quarter + ": zero default point");
                    return;
                }
                if (a.equity_vol <= 0.0) {
                    exclude(f, "inversion", row.quarter + ": zero equity volatility");
                    return;
                }
                try {
                    const FirmQuarterObservation obs{f.firm_id, row.quarter, a.equity_value,
                                                     a.equity_vol, a.default_point, a.rate,
                                                     a.horizon, f.group};
                    const AssetSolution s = invert_kmv(obs);
                    a.asset_value = s.asset_value;
                    a.asset_vol = s.asset_vol;
                    a.classical_dd = classical_dd(s, obs);
                } catch (const Error& e) {
                    exclude(f, "inversion", row.quarter + ": " + e.what());
                    return;
                }
                f.assets.push_back(a);
            }
        });
        flush_exclusions();
    }

    void check_threshold() {
        std::map<Group, std::pair<std::size_t, std::size_t>> tally;  // excluded, total
        for (const auto& f : firms_) {
            auto& t = tally[f.group];
            ++t.second;
            if (f.exclusion) ++t.first;
        }
        for (const auto& [g, t] : tally) {
            const double frac = static_cast<double>(t.first) / static_cast<double>(t.second);
            if (frac > result_.config.max_exclusion_fraction)
                throw ExclusionThresholdBreached(
                    to_string(g) + ": " + std::to_string(t.first) + " of " + std::to_string(t.second) +
                    " firms excluded, above the limit of " +
                    format_double(result_.config.max_exclusion_fraction));
        }
    }

    // Quarter index window [0, hi] used by the fit serving quarter t.
    std::size_t window_end(std::size_t t) const {
        return result_.config.fit_scope == FitScope::Pooled ? result_.quarters.size() - 1
                                                            : std::max<std::size_t>(t, 1);
    }

    std::size_t quarter_index(const std::string& q) const {
        return static_cast<std::size_t>(
            std::lower_bound(result_.quarters.begin(), result_.quarters.end(), q,
                             [](const std::string& a, const std::string& b) {
                                 return parse_quarter(a) < parse_quarter(b);
                             }) -
            result_.quarters.begin());
    }

    AssetPanel panel_for(Group g, std::size_t hi) const {
        AssetPanel p;
        p.group = g;
        for (const auto& f : firms_) {
            if (f.exclusion || f.group != g) continue;
            for (const auto& a : f.assets)
                if (quarter_index(a.quarter) <= hi)
                    p.entries.push_back({a.firm_id, a.quarter, a.asset_value, a.asset_vol,
                                         a.default_point, a.rate, a.horizon});
        }
        return p;
    }

    void fit() {
        const auto& cfg = result_.config;
        if (cfg.fit_scope == FitScope::PerQuarter && result_.quarters.size() < 2)
            throw ValidationError("per-quarter fitting needs at least 2 quarters");

        // Firms that cannot be fitted in some window they appear in.
        if (cfg.fit_scope == FitScope::PerQuarter)
            for (auto& f : firms_) {
                if (f.exclusion) continue;
                for (const auto& a : f.assets) {
                    const std::size_t hi = window_end(quarter_index(a.quarter));
                    const auto n = std::count_if(f.assets.begin(), f.assets.end(), [&](const AssetRow& b) {
                        return quarter_index(b.quarter) <= hi;
                    });
                    if (n < 2) {
                        exclude(f, "estimation", "fewer than 2 quarters in the fit window for " + a.quarter);
                        break;
                    }
                }
            }
        flush_exclusions();

        std::vector<std::size_t> windows;
        if (cfg.fit_scope == FitScope::Pooled)
            windows.push_back(result_.quarters.size() - 1);
        else
            for (std::size_t t = 0; t < result_.quarters.size(); ++t) windows.push_back(window_end(t));

        for (Group g : {Group::ST, Group::NonST}) {
            bool present = false;
            for (const auto& f : firms_) present = present || (!f.exclusion && f.group == g);
            if (!present) continue;
            for (FitMethod m : cfg.methods())
                for (std::size_t w = 0; w < windows.size(); ++w) {
                    const AssetPanel panel = panel_for(g, windows[w]);
                    FitRecord rec;
                    rec.group = g;
                    rec.scope = cfg.fit_scope == FitScope::Pooled ? "pooled" : result_.quarters[w];
                    rec.fit = m == FitMethod::FixedEffects ? fit_fixed_effects(panel)
                                                           : fit_equivalent_vol(panel, cfg.calibration);
                    result_.fits.push_back(std::move(rec));
                }
        }
    }

    const CevGroupFit& fit_for(Group g, FitMethod m, const std::string& quarter) const {
        const std::string scope = result_.config.fit_scope == FitScope::Pooled ? "pooled" : quarter;
        for (const auto& r : result_.fits)
            if (r.group == g && r.fit.method == m && r.scope == scope) return r.fit;
        throw Error("no fit for " + to_string(g) + " " + to_string(m) + " " + scope);
    }

    void distances() {
        const auto& cfg = result_.config;
        const auto methods = cfg.methods();
        cev_.assign(firms_.size(), {});
        parallel_for(firms_.size(), cfg.threads, [&](std::size_t i) {
            FirmWork& f = firms_[i];
            if (f.exclusion) return;
            auto& out = cev_[i];
            out.resize(methods.size());
            for (std::size_t k = 0; k < methods.size(); ++k)
                for (const auto& a : f.assets) {
                    const CevGroupFit& fit = fit_for(f.group, methods[k], a.quarter);
                    try {
                        const CevParams params{fit.delta(a.firm_id), fit.beta};
                        const double p = cev_default_probability(a.asset_value, params, a.default_point,
                                                                 a.rate, a.horizon, cfg.grid);
                        const double dd = cev_dd(p);
                        if (!std::isfinite(dd))
                            throw NoConvergence("probability " + format_double(p) +
                                                " gives no finite distance");
                        out[k].push_back({a.firm_id, a.quarter, model_tag(methods[k]), p, dd});
                    } catch (const Error& e) {
                        exclude(f, "probability", a.quarter + " " + to_string(methods[k]) + ": " + e.what());
                        return;
                    }
                }
        });
        flush_exclusions();
    }

    void finish() {
        const auto methods = result_.config.methods();
        for (const auto& f : firms_) {
            if (f.exclusion) {
                result_.exclusions.push_back(*f.exclusion);
                continue;
            }
            result_.assets.insert(result_.assets.end(), f.assets.begin(), f.assets.end());
        }
        for (const auto& a : result_.assets)
            result_.records.push_back({{a.firm_id, a.quarter, ModelTag::ClassicalKMV,
                                        normal_cdf(-a.classical_dd), a.classical_dd},
                                       a.group});
        for (std::size_t k = 0; k < methods.size(); ++k)
            for (std::size_t i = 0; i < firms_.size(); ++i) {
                if (firms_[i].exclusion) continue;
                for (const auto& r : cev_[i][k]) result_.records.push_back({r, firms_[i].group});
            }
    }

    const RawInputs& in_;
    std::ostream* log_;
    StudyResult result_;
    std::vector<FirmWork> firms_;
    std::vector<std::vector<std::vector<DefaultDistanceRecord>>> cev_;
    std::set<std::string> logged_;
};

}  // namespace

StudyResult run_study(const RawInputs& inputs, const RunConfig& config, std::ostream* log) {
    config.validate();
    validate_inputs(inputs);
    return Study(inputs, config, log).run();
}

}  // namespace cevkmv
