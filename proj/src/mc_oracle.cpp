#include "cevkmv/mc_oracle.hpp"

#include "cevkmv/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

namespace cevkmv {

using detail::require;

namespace {

constexpr std::size_t kBlockPaths = 1 << 15;
constexpr double kTradingDays = 250.0;

struct BlockTally {
    std::size_t defaults = 0;
    std::size_t absorbed = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
};

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::size_t default_steps(double horizon) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(kTradingDays * horizon)));
}

void SimSpec::validate() const {
    require(std::isfinite(v0) && v0 > 0.0, "SimSpec: v0 must be > 0");
    require(std::isfinite(rate), "SimSpec: rate must be finite");
    require(std::isfinite(horizon) && horizon > 0.0, "SimSpec: horizon must be > 0");
    require(steps >= 1, "SimSpec: steps must be >= 1");
    require(paths >= 1, "SimSpec: paths must be >= 1");
    if (const auto* g = std::get_if<GbmDynamics>(&dynamics))
        require(std::isfinite(g->sigma) && g->sigma >= 0.0, "SimSpec: sigma must be >= 0");
    else {
        const auto& c = std::get<CevDynamics>(dynamics);
        require(std::isfinite(c.delta) && c.delta > 0.0, "SimSpec: delta must be > 0");
        require(std::isfinite(c.beta) && c.beta > 0.0, "SimSpec: beta must be > 0");
    }
}

namespace {

BlockTally run_block(const SimSpec& spec, double default_point, std::size_t block) {
    const std::size_t first = block * kBlockPaths;
    const std::size_t count = std::min(kBlockPaths, spec.paths - first);
    std::mt19937_64 rng(mix_seed(spec.seed, block));
    std::normal_distribution<double> normal;

    const double dt = spec.horizon / static_cast<double>(spec.steps);
    const double sqrt_dt = std::sqrt(dt);
    const double discount = std::exp(-spec.rate * spec.horizon);
    BlockTally t;

    const auto* gbm = std::get_if<GbmDynamics>(&spec.dynamics);
    const double log_drift = gbm ? (spec.rate - 0.5 * gbm->sigma * gbm->sigma) * dt : 0.0;
    const double log_diff = gbm ? gbm->sigma * sqrt_dt : 0.0;
    const CevDynamics cev = gbm ? CevDynamics{} : std::get<CevDynamics>(spec.dynamics);

    for (std::size_t p = 0; p < count; ++p) {
        double v = spec.v0;
        if (gbm) {
            double log_v = std::log(v);
            for (std::size_t s = 0; s < spec.steps; ++s) log_v += log_drift + log_diff * normal(rng);
            v = std::exp(log_v);
        } else {
            for (std::size_t s = 0; s < spec.steps; ++s) {
                const double z = normal(rng);
                v += spec.rate * v * dt + cev.delta * std::pow(v, cev.beta) * sqrt_dt * z;
                if (v <= 0.0) {
                    v = 0.0;
                    ++t.absorbed;
                    // Keep the stream aligned with surviving paths.
                    for (++s; s < spec.steps; ++s) normal(rng);
                    break;
                }
            }
        }
        if (v < default_point) ++t.defaults;
        const double x = discount * v;
        t.sum += x;
        t.sum_sq += x * x;
    }
    return t;
}

}  // namespace

SimResult simulate_default_prob(const SimSpec& spec, double default_point, unsigned workers) {
    spec.validate();
    require(std::isfinite(default_point) && default_point >= 0.0,
            "simulate_default_prob: default_point must be >= 0");

    const std::size_t blocks = (spec.paths + kBlockPaths - 1) / kBlockPaths;
    std::vector<BlockTally> tallies(blocks);
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(blocks)));
    if (workers == 1) {
        for (std::size_t b = 0; b < blocks; ++b) tallies[b] = run_block(spec, default_point, b);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t b; (b = next++) < blocks;)
                    tallies[b] = run_block(spec, default_point, b);
            });
        for (auto& th : pool) th.join();
    }

    BlockTally total;
    for (const auto& t : tallies) {
        total.defaults += t.defaults;
        total.absorbed += t.absorbed;
        total.sum += t.sum;
        total.sum_sq += t.sum_sq;
    }
    const double n = static_cast<double>(spec.paths);
    SimResult r;
    r.estimate = static_cast<double>(total.defaults) / n;
    r.std_error = std::sqrt(r.estimate * (1.0 - r.estimate) / n);
    r.absorbed_fraction = static_cast<double>(total.absorbed) / n;
    r.discounted_mean = total.sum / n;
    const double var = std::max(total.sum_sq / n - r.discounted_mean * r.discounted_mean, 0.0);
    r.discounted_mean_se = std::sqrt(var / n);
    return r;
}

AssetPanel simulate_panel(const PanelSpec& spec, std::uint64_t seed) {
    require(spec.firms >= 1 && spec.quarters >= 2, "simulate_panel: need >= 1 firm and >= 2 quarters");
    require(spec.noise >= 0.0, "simulate_panel: noise must be >= 0");
    std::mt19937_64 rng(mix_seed(seed, 0));
    std::normal_distribution<double> normal;

    AssetPanel panel;
    panel.group = spec.group;
    const Quarter first = parse_quarter(spec.first_quarter);
    for (std::size_t i = 0; i < spec.firms; ++i) {
        const std::string firm = to_string(spec.group) + "_" + std::to_string(i + 1);
        double log_v = std::log(spec.asset_median) + spec.asset_log_sd * normal(rng);
        const double local_vol =
            spec.local_vol_median * std::exp(spec.local_vol_log_sd * normal(rng));
        const double log_delta = std::log(local_vol) - (spec.beta - 1.0) * log_v;
        const double leverage = spec.leverage_median * std::exp(spec.leverage_log_sd * normal(rng));
        const double debt = leverage * std::exp(log_v);
        Quarter q = first;
        for (std::size_t t = 0; t < spec.quarters; ++t, q = next(q)) {
            if (t > 0) log_v += spec.asset_step_sd * normal(rng);
            const double eps = normal(rng);
            const double vol = std::exp(log_delta + (spec.beta - 1.0) * log_v + spec.noise * eps);
            panel.entries.push_back(
                {firm, to_string(q), std::exp(log_v), vol, debt, spec.rate, spec.horizon});
        }
    }
    return panel;
}

std::vector<AssetPanel> simulate_panel(const std::vector<PanelSpec>& groups, std::uint64_t seed) {
    std::vector<AssetPanel> out;
    for (std::size_t g = 0; g < groups.size(); ++g)
        out.push_back(simulate_panel(groups[g], mix_seed(seed, 1000 + g)));
    return out;
}

StudySpec reference_study(std::size_t firms_per_group, std::size_t quarters, std::uint64_t seed) {
    StudySpec s;
    s.quarters = quarters;
    s.seed = seed;
    // Lognormal medians with log-sd from mean / median; volatility as mean and sd.
    s.groups.push_back(
        {Group::ST, firms_per_group, 0.98, 2.530, 0.9075, 1.140, 1.708, 0.85, 0.480, 0.116});
    s.groups.push_back(
        {Group::NonST, firms_per_group, 1.14, 8.165, 1.325, 4.433, 1.927, 0.85, 0.411, 0.102});
    return s;
}

namespace {

std::vector<Date> trading_days(const StudySpec& spec) {
    const Quarter first = parse_quarter(spec.first_quarter);
    Quarter last = first;
    for (std::size_t t = 1; t < spec.quarters; ++t) last = next(last);

    Date start = quarter_start(first);
    for (std::size_t n = 0; n < spec.history_days;) {
        start -= std::chrono::days{1};
        if (is_weekday(start)) ++n;
    }
    std::vector<Date> days;
    for (Date d = start; d <= quarter_end(last); d += std::chrono::days{1})
        if (is_weekday(d)) days.push_back(d);
    return days;
}

}  // namespace

RawInputs simulate_study_inputs(const StudySpec& spec) {
    require(spec.quarters >= 2, "simulate_study_inputs: need >= 2 quarters");
    require(spec.history_days >= 251, "simulate_study_inputs: need > 250 days of history");
    const std::vector<Date> days = trading_days(spec);
    const double dt = 1.0 / kTradingDays;
    const double sqrt_dt = std::sqrt(dt);

    std::vector<Quarter> quarters{parse_quarter(spec.first_quarter)};
    while (quarters.size() < spec.quarters) quarters.push_back(next(quarters.back()));

    RawInputs in;
    for (const auto& qq : quarters) in.rates[to_string(qq)] = spec.rate;

    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
        const StudyGroupSpec& gs = spec.groups[g];
        for (std::size_t i = 0; i < gs.firms; ++i) {
            const std::string firm = to_string(gs.group) + "_" + std::to_string(i + 1);
            for (std::uint64_t attempt = 0;; ++attempt) {
                if (attempt == 256)
                    throw NoConvergence("simulate_study_inputs: no surviving path for " + firm);
                std::mt19937_64 rng(mix_seed(spec.seed, (g << 40) + (i << 8) + attempt));
                std::normal_distribution<double> normal;
                std::uniform_real_distribution<double> unif(0.2, 0.8);

                const double z_equity = normal(rng);
                const double z_debt = gs.log_correlation * z_equity +
                                      std::sqrt(1.0 - gs.log_correlation * gs.log_correlation) * normal(rng);
                const double equity = gs.equity_median * std::exp(gs.equity_log_sd * z_equity);
                const double debt = gs.debt_median * std::exp(gs.debt_log_sd * z_debt);
                double equity_vol = 0.0;
                do equity_vol = gs.equity_vol_mean + gs.equity_vol_sd * normal(rng);
                while (equity_vol < 0.1 || equity_vol > 1.5);
                const double short_share = unif(rng);

                FirmQuarterObservation obs{firm, "", equity, equity_vol, debt, spec.rate,
                                           spec.horizon, gs.group};
                const AssetSolution start = invert_kmv(obs);
                const double delta = start.asset_vol * std::pow(start.asset_value, 1.0 - gs.beta);

                std::vector<DailyReturn> returns;
                std::vector<double> equity_path;
                returns.reserve(days.size());
                equity_path.reserve(days.size());
                double v = start.asset_value;
                double e_prev = equity;
                equity_path.push_back(equity);
                bool failed = false;
                for (std::size_t d = 1; d < days.size(); ++d) {
                    v += spec.rate * v * dt + delta * std::pow(v, gs.beta) * sqrt_dt * normal(rng);
                    if (!(v > 1e-6 * start.asset_value)) {
                        failed = true;
                        break;
                    }
                    const double lv = delta * std::pow(v, gs.beta - 1.0);
                    const double e = bsm_call(v, debt, spec.rate, lv, spec.horizon);
                    if (!(e > 0.0)) {
                        failed = true;
                        break;
                    }
                    returns.push_back({days[d], e / e_prev - 1.0});
                    equity_path.push_back(e);
                    e_prev = e;
                }
                if (failed) continue;

                in.daily_returns[firm] = std::move(returns);
                for (const auto& qq : quarters) {
                    const Date end = quarter_end(qq);
                    const auto it = std::upper_bound(days.begin(), days.end(), end);
                    const double e = equity_path[static_cast<std::size_t>(it - days.begin()) - 1];
                    in.fundamentals.push_back({firm, to_string(qq), e, short_share * debt,
                                               2.0 * (1.0 - short_share) * debt, gs.group});
                }
                break;
            }
        }
    }
    return in;
}

}  // namespace cevkmv
