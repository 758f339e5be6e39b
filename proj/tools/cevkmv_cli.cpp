#include "cevkmv/cev_engine.hpp"
#include "cevkmv/config.hpp"
#include "cevkmv/csv_io.hpp"
#include "cevkmv/errors.hpp"
#include "cevkmv/market_model.hpp"
#include "cevkmv/mc_oracle.hpp"
#include "cevkmv/pipeline.hpp"
#include "cevkmv/report.hpp"
#include "cevkmv/stats_tests.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

using namespace cevkmv;

namespace {

constexpr int kOk = 0;
constexpr int kOther = 1;
constexpr int kInvalid = 2;
constexpr int kThreshold = 3;

struct RunArgs {
    std::string returns, fundamentals, rates, config, out;
    std::optional<unsigned> threads;
};

int cmd_run(const RunArgs& a) {
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
    if (!a.out.empty()) cfg.output_dir = a.out;
    if (a.threads) cfg.threads = *a.threads;
    const RawInputs inputs = load_inputs(a.returns, a.fundamentals, a.rates);
    validate_inputs(inputs);
    const StudyResult r = run_study(inputs, cfg, &std::cerr);
    std::filesystem::create_directories(cfg.output_dir);
    write_bundle(r, cfg.output_dir);

    std::size_t excluded = 0;
    for (const auto& e : r.exclusions) excluded += e.firm_quarters;
    std::printf("quarters %zu, firm-quarters %zu, excluded %zu, filled %zu\n", r.quarters.size(),
                r.input_firm_quarters, excluded, r.fills.size());
    for (const auto& f : r.fits)
        std::printf("fit %s %s %s beta %.6f\n", to_string(f.group).c_str(), to_string(f.fit.method).c_str(),
                    f.scope.c_str(), f.fit.beta);
    std::printf("bundle written to %s\n", cfg.output_dir.c_str());
    return kOk;
}

struct InvertArgs {
    double equity = 0, equity_vol = 0, std_debt = 0, ltd_debt = 0, rate = 0, horizon = 1;
};

int cmd_invert(const InvertArgs& a) {
    FirmQuarterObservation obs{"cli", "", a.equity, a.equity_vol, default_point(a.std_debt, a.ltd_debt), a.rate,
                               a.horizon, Group::NonST};
    const auto sol = invert_kmv(obs);
    std::printf("default_point %s\nasset_value %s\nasset_vol %s\nclassical_dd %s\niterations %d\n",
                format_double(obs.default_point).c_str(), format_double(sol.asset_value).c_str(),
                format_double(sol.asset_vol).c_str(), format_double(classical_dd(sol, obs)).c_str(),
                sol.iterations);
    return kOk;
}

struct ProbArgs {
    double asset = 0, default_point = 0, beta = 1, rate = 0, horizon = 1;
    std::optional<double> delta, local_vol;
    PdeGrid grid;
};

int cmd_prob(const ProbArgs& a) {
    if (a.delta.has_value() == a.local_vol.has_value())
        throw ValidationError("prob: give exactly one of --delta and --local-vol");
    // local vol is delta * V^(beta - 1) at the current asset value
    const double delta = a.delta ? *a.delta : *a.local_vol * std::pow(a.asset, 1.0 - a.beta);
    const auto est = cev_default_probability_detail(a.asset, {delta, a.beta}, a.default_point, a.rate, a.horizon,
                                                    a.grid);
    std::printf("delta %s\nprobability %s\ndistance %s\ngrid_change %s\n", format_double(delta).c_str(),
                format_double(est.probability).c_str(), format_double(cev_dd(est.probability)).c_str(),
                format_double(est.grid_change).c_str());
    return kOk;
}

struct TestArgs {
    std::string file, st_column = "st", nst_column = "nst";
};

int cmd_test(const TestArgs& a) {
    const CsvTable t = read_csv(a.file);
    const std::size_t cs = t.column(a.st_column), cn = t.column(a.nst_column);
    std::vector<double> st, nst;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        // columns may have different lengths; empty cells are skipped
        for (auto [col, out] : {std::pair{cs, &st}, std::pair{cn, &nst}}) {
            const std::string& cell = t.rows[i][col];
            if (cell.empty()) continue;
            try {
                out->push_back(parse_double(cell));
            } catch (const Error&) {
                throw ValidationError(t.source + ":" + std::to_string(t.line_numbers[i]) + ": '" + cell +
                                      "' is not a number");
            }
        }
    }
    const auto pst = positive_part(st), pnst = positive_part(nst);
    const std::size_t dropped = st.size() + nst.size() - pst.size() - pnst.size();
    const auto rep = compare_groups("", pst, pnst);
    std::printf("m %zu\nn %zu\ndropped %zu\n", rep.m, rep.n, dropped);
    std::printf("st_alpha %s\nst_beta %s\nnst_alpha %s\nnst_beta %s\n", format_double(rep.st_fit.alpha).c_str(),
                format_double(rep.st_fit.beta).c_str(), format_double(rep.nst_fit.alpha).c_str(),
                format_double(rep.nst_fit.beta).c_str());
    std::printf("z1 %s\np1 %s\nz2 %s\np2 %s\n", format_double(rep.z1).c_str(), format_double(rep.p1).c_str(),
                format_double(rep.z2).c_str(), format_double(rep.p2).c_str());
    return kOk;
}

struct SimulateArgs {
    std::uint64_t seed = 1;
    std::size_t firms = 60, quarters = 9;
    std::optional<double> beta_st, beta_nst;
    std::string out = "synthetic";
};

int cmd_simulate(const SimulateArgs& a) {
    StudySpec spec = reference_study(a.firms, a.quarters, a.seed);
    for (auto& g : spec.groups) {
        if (g.group == Group::ST && a.beta_st) g.beta = *a.beta_st;
        if (g.group == Group::NonST && a.beta_nst) g.beta = *a.beta_nst;
    }
    const RawInputs in = simulate_study_inputs(spec);
    std::filesystem::create_directories(a.out);
    write_inputs(in, a.out);
    std::printf("wrote %zu firm-quarters for %zu firms to %s\n", in.fundamentals.size(), in.daily_returns.size(),
                a.out.c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distance to default under the classical KMV and CEV-KMV models"};
    app.require_subcommand(1);
    int status = kOk;

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run a full study and write the output bundle");
    run_cmd->add_option("--returns", run.returns, "Daily returns CSV (firm_id,date,return)")->required();
    run_cmd->add_option("--fundamentals", run.fundamentals,
                        "Quarterly CSV (firm_id,quarter,equity_value,std_debt,ltd_debt,group)")
        ->required();
    run_cmd->add_option("--rates", run.rates, "Quarterly rates CSV (quarter,rate)")->required();
    run_cmd->add_option("--config", run.config, "key = value configuration file");
    run_cmd->add_option("--out", run.out, "Output directory (overrides output_dir)");
    run_cmd->add_option("--threads", run.threads, "Worker threads, 0 for all cores");
    run_cmd->callback([&] { status = cmd_run(run); });

    InvertArgs inv;
    auto* inv_cmd = app.add_subcommand("invert", "Recover asset value and volatility for one firm");
    inv_cmd->add_option("--equity", inv.equity, "Equity market value")->required();
    inv_cmd->add_option("--equity-vol", inv.equity_vol, "Annualized equity volatility")->required();
    inv_cmd->add_option("--std-debt", inv.std_debt, "Short-term debt")->required();
    inv_cmd->add_option("--ltd-debt", inv.ltd_debt, "Long-term debt")->required();
    inv_cmd->add_option("--rate", inv.rate, "Risk-free rate")->required();
    inv_cmd->add_option("--horizon", inv.horizon, "Horizon in years")->capture_default_str();
    inv_cmd->callback([&] { status = cmd_invert(inv); });

    ProbArgs prob;
    auto* prob_cmd = app.add_subcommand("prob", "CEV default probability for one firm");
    prob_cmd->add_option("--asset", prob.asset, "Asset value")->required();
    prob_cmd->add_option("--default-point", prob.default_point, "Default point D")->required();
    prob_cmd->add_option("--beta", prob.beta, "Elasticity beta")->capture_default_str();
    prob_cmd->add_option("--delta", prob.delta, "CEV scale delta");
    prob_cmd->add_option("--local-vol", prob.local_vol, "Local volatility at the current asset value");
    prob_cmd->add_option("--rate", prob.rate, "Risk-free rate")->required();
    prob_cmd->add_option("--horizon", prob.horizon, "Horizon in years")->capture_default_str();
    prob_cmd->add_option("--grid-space", prob.grid.num_space, "Space nodes")->capture_default_str();
    prob_cmd->add_option("--grid-time", prob.grid.num_time, "Time steps")->capture_default_str();
    prob_cmd->add_option("--grid-tolerance", prob.grid.tolerance, "Doubled-grid tolerance")->capture_default_str();
    prob_cmd->callback([&] { status = cmd_prob(prob); });

    TestArgs test;
    auto* test_cmd = app.add_subcommand("test", "Gamma Z1 and Wilcoxon Z2 on two distance columns");
    test_cmd->add_option("file", test.file, "CSV with one column per group")->required();
    test_cmd->add_option("--st-column", test.st_column, "Column holding ST distances")->capture_default_str();
    test_cmd->add_option("--nst-column", test.nst_column, "Column holding non-ST distances")->capture_default_str();
    test_cmd->callback([&] { status = cmd_test(test); });

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Write synthetic two-group study inputs");
    sim_cmd->add_option("--seed", sim.seed, "Random seed")->required();
    sim_cmd->add_option("--firms", sim.firms, "Firms per group")->capture_default_str();
    sim_cmd->add_option("--quarters", sim.quarters, "Quarters")->capture_default_str();
    sim_cmd->add_option("--beta-st", sim.beta_st, "Planted beta for the ST group");
    sim_cmd->add_option("--beta-nst", sim.beta_nst, "Planted beta for the non-ST group");
    sim_cmd->add_option("--out", sim.out, "Output directory")->capture_default_str();
    sim_cmd->callback([&] { status = cmd_simulate(sim); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInvalid;
    } catch (const ExclusionThresholdBreached& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kThreshold;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOther;
    }
    return status;
}
