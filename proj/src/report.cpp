#include "cevkmv/report.hpp"

#include "cevkmv/csv_io.hpp"
#include "cevkmv/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace cevkmv {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::vector<double> distances(const StudyResult& r, ModelTag model, const std::string& quarter,
                              Group group) {
    std::vector<double> out;
    for (const auto& g : r.records)
        if (g.record.model == model && g.record.quarter == quarter && g.group == group)
            out.push_back(g.record.distance);
    return out;
}

namespace {

double mean_of(const std::vector<double>& x) {
    return x.empty() ? std::nan("") : std::accumulate(x.begin(), x.end(), 0.0) / x.size();
}

double sd_of(const std::vector<double>& x) {
    if (x.size() < 2) return std::nan("");
    const double m = mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / (x.size() - 1));
}

std::optional<GammaFit> try_gamma(const std::vector<double>& x) {
    if (x.size() < 2) return std::nullopt;
    try {
        return gamma_mle(x);
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace

std::vector<double> positive_part(const std::vector<double>& x) {
    std::vector<double> out;
    for (double v : x)
        if (v > 0.0 && std::isfinite(v)) out.push_back(v);
    return out;
}

std::vector<GroupSummary> summarize(const StudyResult& r, ModelTag model) {
    std::vector<GroupSummary> out;
    for (const auto& q : r.quarters)
        for (Group g : {Group::ST, Group::NonST}) {
            const auto x = distances(r, model, q, g);
            if (x.empty()) continue;
            const auto pos = positive_part(x);
            out.push_back({q, g, x.size(), x.size() - pos.size(), mean_of(x), sd_of(x), try_gamma(pos)});
        }
    return out;
}

std::vector<QuarterTest> group_tests(const StudyResult& r, ModelTag model) {
    std::vector<QuarterTest> out;
    for (const auto& q : r.quarters) {
        const auto st_all = distances(r, model, q, Group::ST);
        const auto nst_all = distances(r, model, q, Group::NonST);
        const auto st = positive_part(st_all);
        const auto nst = positive_part(nst_all);
        QuarterTest t{q, std::nullopt, st_all.size() + nst_all.size() - st.size() - nst.size(), ""};
        if (st_all.empty() || nst_all.empty()) {
            t.note = "one group is empty";
        } else if (!try_gamma(st) || !try_gamma(nst)) {
            t.note = "gamma fit undefined (fewer than 2 distinct positive distances)";
        } else {
            t.report = compare_groups(q, st, nst);
        }
        out.push_back(t);
    }
    return out;
}

std::vector<double> mean_gap_series(const StudyResult& r, ModelTag model) {
    std::vector<double> out;
    for (const auto& q : r.quarters)
        out.push_back(mean_of(distances(r, model, q, Group::NonST)) -
                      mean_of(distances(r, model, q, Group::ST)));
    return out;
}

namespace {

std::string fixed(double x, int digits = 6) {
    if (!std::isfinite(x)) return format_double(x);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

std::string short_num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

FitMethod parse_method(const std::string& s) {
    if (s == "FixedEffects") return FitMethod::FixedEffects;
    if (s == "EquivalentVol") return FitMethod::EquivalentVol;
    throw ValidationError("unknown fit method '" + s + "'");
}

ModelTag parse_model(const std::string& s) {
    for (ModelTag m : {ModelTag::ClassicalKMV, ModelTag::CevKmvFE, ModelTag::CevKmvEV})
        if (to_string(m) == s) return m;
    throw ValidationError("unknown model '" + s + "'");
}

// Minimal SVG canvas with one plotting area.
class Svg {
public:
    Svg(double width, double height) : w_(width), h_(height) {
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
             << "\" viewBox=\"0 0 " << w_ << ' ' << h_ << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
             << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    }

    // Plot area in pixels and the data ranges mapped onto it.
    void frame(double x0, double y0, double pw, double ph, double xmin, double xmax, double ymin,
               double ymax, const std::string& title, const std::string& xlabel,
               const std::string& ylabel) {
        px_ = x0;
        py_ = y0;
        pw_ = pw;
        ph_ = ph;
        xmin_ = xmin;
        xmax_ = xmax > xmin ? xmax : xmin + 1.0;
        ymin_ = ymin;
        ymax_ = ymax > ymin ? ymax : ymin + 1.0;
        out_ << "<rect x=\"" << px_ << "\" y=\"" << py_ << "\" width=\"" << pw_ << "\" height=\"" << ph_
             << "\" fill=\"none\" stroke=\"#333\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double xv = xmin_ + (xmax_ - xmin_) * k / 4.0;
            const double yv = ymin_ + (ymax_ - ymin_) * k / 4.0;
            text(sx(xv), py_ + ph_ + 14, short_num(xv), "middle");
            text(px_ - 4, sy(yv) + 4, short_num(yv), "end");
        }
        text(px_ + pw_ / 2, py_ - 8, title, "middle");
        text(px_ + pw_ / 2, py_ + ph_ + 30, xlabel, "middle");
        out_ << "<text x=\"" << px_ - 42 << "\" y=\"" << py_ + ph_ / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 "
             << px_ - 42 << ' ' << py_ + ph_ / 2 << ")\">" << ylabel << "</text>\n";
    }

    void bar(double x_lo, double x_hi, double y, const std::string& fill) {
        const double top = sy(y);
        out_ << "<rect x=\"" << fmt(sx(x_lo)) << "\" y=\"" << fmt(top) << "\" width=\""
             << fmt(sx(x_hi) - sx(x_lo)) << "\" height=\"" << fmt(sy(ymin_) - top) << "\" fill=\"" << fill
             << "\" stroke=\"white\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
        out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : pts) out_ << fmt(sx(x)) << ',' << fmt(sy(y)) << ' ';
        out_ << "\"/>\n";
    }

    void dot(double x, double y, const std::string& fill) {
        out_ << "<circle cx=\"" << fmt(sx(x)) << "\" cy=\"" << fmt(sy(y)) << "\" r=\"2\" fill=\"" << fill
             << "\" fill-opacity=\"0.6\"/>\n";
    }

    void text(double x, double y, const std::string& s, const char* anchor = "start") {
        out_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" text-anchor=\"" << anchor << "\">" << s
             << "</text>\n";
    }

    void save(const std::string& path) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error("cannot write " + path);
        f << out_.str() << "</svg>\n";
    }

private:
    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return buf;
    }
    double sx(double x) const { return px_ + (x - xmin_) / (xmax_ - xmin_) * pw_; }
    double sy(double y) const { return py_ + ph_ - (y - ymin_) / (ymax_ - ymin_) * ph_; }

    std::ostringstream out_;
    double w_, h_;
    double px_ = 0, py_ = 0, pw_ = 1, ph_ = 1;
    double xmin_ = 0, xmax_ = 1, ymin_ = 0, ymax_ = 1;
};

const char* color(Group g) { return g == Group::ST ? "#c0392b" : "#2471a3"; }

constexpr int kBins = 20;

struct Histogram {
    double lo = 0.0, width = 1.0;
    std::vector<std::size_t> counts;
};

Histogram histogram(const std::vector<double>& x) {
    Histogram h;
    h.counts.assign(kBins, 0);
    std::vector<double> finite;
    for (double v : x)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.empty()) return h;
    const auto [mn, mx] = std::minmax_element(finite.begin(), finite.end());
    h.lo = std::min(0.0, *mn);
    h.width = (*mx > h.lo ? *mx - h.lo : 1.0) / kBins;
    for (double v : finite) {
        auto b = static_cast<int>((v - h.lo) / h.width);
        h.counts[std::clamp(b, 0, kBins - 1)]++;
    }
    return h;
}

std::string file_key(ModelTag m) { return to_string(m); }

void write_fig1(const StudyResult& r, const std::string& dir, std::vector<std::string>& outputs) {
    std::vector<std::vector<std::string>> rows;
    for (ModelTag m : r.models())
        for (const auto& q : r.quarters) {
            Svg svg(760, 320);
            double x0 = 70;
            for (Group g : {Group::ST, Group::NonST}) {
                const auto x = distances(r, m, q, g);
                const Histogram h = histogram(x);
                const auto gamma = try_gamma(positive_part(x));
                std::size_t n = 0;
                for (auto c : h.counts) n += c;
                double ymax = 0.0;
                std::vector<double> dens(kBins), fitted(kBins);
                for (int b = 0; b < kBins; ++b) {
                    const double mid = h.lo + (b + 0.5) * h.width;
                    dens[b] = n ? h.counts[b] / (n * h.width) : 0.0;
                    fitted[b] = gamma ? gamma_pdf(mid, gamma->alpha, gamma->beta) : std::nan("");
                    ymax = std::max({ymax, dens[b], std::isfinite(fitted[b]) ? fitted[b] : 0.0});
                    rows.push_back({to_string(m), q, to_string(g), fixed(h.lo + b * h.width),
                                    fixed(h.lo + (b + 1) * h.width), std::to_string(h.counts[b]),
                                    fixed(dens[b]), fixed(fitted[b])});
                }
                svg.frame(x0, 30, 290, 230, h.lo, h.lo + kBins * h.width, 0.0, ymax * 1.05,
                          to_string(g) + " " + q + " " + to_string(m), "distance to default", "density");
                for (int b = 0; b < kBins; ++b)
                    svg.bar(h.lo + b * h.width, h.lo + (b + 1) * h.width, dens[b], color(g));
                if (gamma) {
                    std::vector<std::pair<double, double>> curve;
                    for (int k = 0; k <= 100; ++k) {
                        const double xv = h.lo + kBins * h.width * k / 100.0;
                        curve.push_back({xv, gamma_pdf(xv, gamma->alpha, gamma->beta)});
                    }
                    svg.polyline(curve, "#111");
                }
                x0 += 380;
            }
            const std::string name = "plots/fig1_histogram_" + file_key(m) + "_" + q + ".svg";
            svg.save(dir + "/" + name);
            outputs.push_back(name);
        }
    write_csv(dir + "/plots/fig1_histograms.csv",
              {"model", "quarter", "group", "bin_lo", "bin_hi", "count", "density", "gamma_density"}, rows);
    outputs.push_back("plots/fig1_histograms.csv");
}

void write_fig2(const StudyResult& r, const std::string& dir, std::vector<std::string>& outputs) {
    std::vector<std::vector<std::string>> rows;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& a : r.assets) {
        const double x = std::log(a.asset_value), y = std::log(a.asset_vol);
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
        rows.push_back({a.firm_id, a.quarter, to_string(a.group), format_double(x), format_double(y)});
    }
    if (r.assets.empty()) xmin = ymin = 0.0, xmax = ymax = 1.0;
    Svg svg(520, 380);
    svg.frame(70, 30, 420, 300, xmin, xmax, ymin, ymax, "ln asset volatility against ln asset value",
              "ln V_A", "ln sigma_A");
    for (const auto& a : r.assets) svg.dot(std::log(a.asset_value), std::log(a.asset_vol), color(a.group));
    svg.text(80, 50, "ST", "start");
    svg.text(80, 64, "NonST", "start");
    svg.save(dir + "/plots/fig2_scatter.svg");
    write_csv(dir + "/plots/fig2_scatter.csv", {"firm_id", "quarter", "group", "ln_asset_value", "ln_asset_vol"},
              rows);
    outputs.push_back("plots/fig2_scatter.svg");
    outputs.push_back("plots/fig2_scatter.csv");
}

void write_fig3(const StudyResult& r, const std::string& dir, std::vector<std::string>& outputs) {
    std::vector<std::vector<std::string>> rows;
    double ymin = 0.0, ymax = 0.0;
    std::map<ModelTag, std::vector<double>> series;
    for (ModelTag m : r.models()) {
        series[m] = mean_gap_series(r, m);
        for (std::size_t t = 0; t < r.quarters.size(); ++t) {
            const double v = series[m][t];
            rows.push_back({to_string(m), r.quarters[t], fixed(v)});
            if (std::isfinite(v)) {
                ymin = std::min(ymin, v);
                ymax = std::max(ymax, v);
            }
        }
    }
    Svg svg(560, 380);
    const double n = static_cast<double>(std::max<std::size_t>(r.quarters.size(), 2) - 1);
    svg.frame(70, 30, 420, 300, 0.0, n, ymin, ymax * 1.05 + 1e-9, "mean distance gap, NonST minus ST",
              "quarter index", "gap");
    const char* palette[] = {"#7f8c8d", "#27ae60", "#8e44ad"};
    int k = 0;
    for (const auto& [m, s] : series) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t t = 0; t < s.size(); ++t)
            if (std::isfinite(s[t])) pts.push_back({static_cast<double>(t), s[t]});
        svg.polyline(pts, palette[k % 3]);
        svg.text(500, 50 + 14 * k, to_string(m));
        ++k;
    }
    svg.save(dir + "/plots/fig3_mean_gap.svg");
    write_csv(dir + "/plots/fig3_mean_gap.csv", {"model", "quarter", "mean_gap"}, rows);
    outputs.push_back("plots/fig3_mean_gap.svg");
    outputs.push_back("plots/fig3_mean_gap.csv");
}

std::vector<std::string> summary_row(const GroupSummary& s) {
    return {s.quarter,
            to_string(s.group),
            fixed(s.mean),
            fixed(s.std_dev),
            s.gamma ? fixed(s.gamma->alpha) : "NA",
            s.gamma ? fixed(s.gamma->scale()) : "NA",
            std::to_string(s.n),
            std::to_string(s.non_positive)};
}

std::vector<std::string> test_row(const QuarterTest& t) {
    const std::string dropped = std::to_string(t.dropped);
    if (!t.report) return {t.quarter, "NA", "NA", "NA", "NA", "NA", "NA", dropped, t.note};
    const auto& r = *t.report;
    return {t.quarter, fixed(r.z1), fixed(r.p1), fixed(r.z2), fixed(r.p2),
            std::to_string(r.m), std::to_string(r.n), dropped, ""};
}

}  // namespace

void write_bundle(const StudyResult& r, const std::string& dir) {
    fs::create_directories(dir + "/plots");
    std::vector<std::string> outputs;
    auto add = [&](const std::string& name, const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows) {
        write_csv(dir + "/" + name, header, rows);
        outputs.push_back(name);
    };

    std::vector<std::vector<std::string>> rows;
    for (const auto& a : r.assets)
        rows.push_back({a.firm_id, a.quarter, to_string(a.group), format_double(a.equity_value),
                        format_double(a.equity_vol), format_double(a.default_point), format_double(a.rate),
                        format_double(a.horizon), format_double(a.asset_value), format_double(a.asset_vol),
                        format_double(a.classical_dd)});
    add("assets.csv",
        {"firm_id", "quarter", "group", "equity_value", "equity_vol", "default_point", "rate", "horizon",
         "asset_value", "asset_vol", "classical_dd"},
        rows);

    rows.clear();
    for (const auto& g : r.records)
        rows.push_back({g.record.firm_id, g.record.quarter, to_string(g.group), to_string(g.record.model),
                        format_double(g.record.probability), format_double(g.record.distance)});
    add("dd_records.csv", {"firm_id", "quarter", "group", "model", "probability", "distance"}, rows);

    rows.clear();
    std::vector<std::vector<std::string>> delta_rows;
    for (const auto& f : r.fits) {
        rows.push_back({to_string(f.group), to_string(f.fit.method), f.scope, format_double(f.fit.beta),
                        format_double(f.fit.sse), std::to_string(f.fit.n_obs)});
        for (const auto& [firm, d] : f.fit.deltas)
            delta_rows.push_back({to_string(f.group), to_string(f.fit.method), f.scope, firm, format_double(d)});
    }
    add("fits.csv", {"group", "method", "scope", "beta", "sse", "n_obs"}, rows);
    add("deltas.csv", {"group", "method", "scope", "firm_id", "delta"}, delta_rows);

    rows.clear();
    for (const auto& e : r.exclusions)
        rows.push_back({e.firm_id, to_string(e.group), e.stage, e.reason, std::to_string(e.firm_quarters)});
    add("exclusions.csv", {"firm_id", "group", "stage", "reason", "firm_quarters"}, rows);

    rows.clear();
    for (const auto& f : r.fills) rows.push_back({f.firm_id, f.quarter, f.field, f.source_quarter});
    add("fills.csv", {"firm_id", "quarter", "field", "source_quarter"}, rows);

    const std::vector<std::string> summary_header{"Quarter", "Group", "Mean", "Std.", "Alpha", "Beta",
                                                "N", "NonPositive"};
    const std::vector<std::string> test_header{"Quarter", "Z1", "P1", "Z2", "P2", "M", "N", "Dropped", "Note"};

    rows.clear();
    for (const auto& s : summarize(r, ModelTag::ClassicalKMV)) rows.push_back(summary_row(s));
    add("table2_classical_dd.csv", summary_header, rows);

    rows.clear();
    for (const auto& t : group_tests(r, ModelTag::ClassicalKMV)) rows.push_back(test_row(t));
    add("table3_classical_tests.csv", test_header, rows);

    std::vector<std::string> h4{"Model"};
    h4.insert(h4.end(), summary_header.begin(), summary_header.end());
    std::vector<std::string> h5{"Model"};
    h5.insert(h5.end(), test_header.begin(), test_header.end());
    rows.clear();
    std::vector<std::vector<std::string>> rows5;
    for (ModelTag m : r.models()) {
        if (m == ModelTag::ClassicalKMV) continue;
        for (const auto& s : summarize(r, m)) {
            auto row = summary_row(s);
            row.insert(row.begin(), to_string(m));
            rows.push_back(row);
        }
        for (const auto& t : group_tests(r, m)) {
            auto row = test_row(t);
            row.insert(row.begin(), to_string(m));
            rows5.push_back(row);
        }
    }
    add("table4_cev_dd.csv", h4, rows);
    add("table5_cev_tests.csv", h5, rows5);

    write_fig1(r, dir, outputs);
    write_fig2(r, dir, outputs);
    write_fig3(r, dir, outputs);

    json m;
    m["format"] = "cevkmv-study-1";
    json cfg = json::object();
    for (const auto& [k, v] : to_key_values(r.config)) cfg[k] = v;
    m["config"] = cfg;
    m["quarters"] = r.quarters;
    m["input_firm_quarters"] = r.input_firm_quarters;

    json firms = json::object();
    for (Group g : {Group::ST, Group::NonST}) {
        std::size_t total = 0, excluded = 0;
        for (const auto& [id, grp] : r.firm_groups) total += grp == g;
        for (const auto& e : r.exclusions) excluded += e.group == g;
        firms[to_string(g)] = {{"input", total}, {"excluded", excluded}, {"used", total - excluded}};
    }
    m["firms"] = firms;

    json counts = json::object();
    for (ModelTag t : r.models()) {
        std::size_t n = 0;
        for (const auto& g : r.records) n += g.record.model == t;
        counts[to_string(t)] = n;
    }
    m["records_per_model"] = counts;
    std::size_t excluded_fq = 0;
    for (const auto& e : r.exclusions) excluded_fq += e.firm_quarters;
    m["excluded_firm_quarters"] = excluded_fq;

    json ex = json::array();
    for (const auto& e : r.exclusions)
        ex.push_back({{"firm_id", e.firm_id}, {"group", to_string(e.group)}, {"stage", e.stage},
                      {"reason", e.reason}, {"firm_quarters", e.firm_quarters}});
    m["exclusions"] = ex;
    m["filled_values"] = r.fills.size();

    json fits = json::array();
    for (const auto& f : r.fits)
        fits.push_back({{"group", to_string(f.group)}, {"method", to_string(f.fit.method)}, {"scope", f.scope},
                        {"beta", f.fit.beta}, {"sse", f.fit.sse}, {"n_obs", f.fit.n_obs},
                        {"n_firms", f.fit.deltas.size()}});
    m["fits"] = fits;
    m["outputs"] = outputs;

    std::ofstream out(dir + "/manifest.json", std::ios::binary);
    if (!out) throw Error("cannot write " + dir + "/manifest.json");
    out << m.dump(2) << '\n';
}

StudyResult load_bundle(const std::string& dir) {
    StudyResult r;
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw ValidationError("no manifest.json in " + dir);
    const json m = json::parse(mf);
    KeyValues kv;
    for (const auto& [k, v] : m.at("config").items()) kv.emplace_back(k, v.get<std::string>());
    r.config = from_key_values(kv);
    r.quarters = m.at("quarters").get<std::vector<std::string>>();
    r.input_firm_quarters = m.at("input_firm_quarters").get<std::size_t>();

    const CsvTable at = read_csv(dir + "/assets.csv");
    for (const auto& row : at.rows) {
        AssetRow a;
        a.firm_id = row[at.column("firm_id")];
        a.quarter = row[at.column("quarter")];
        a.group = parse_group(row[at.column("group")]);
        a.equity_value = parse_double(row[at.column("equity_value")]);
        a.equity_vol = parse_double(row[at.column("equity_vol")]);
        a.default_point = parse_double(row[at.column("default_point")]);
        a.rate = parse_double(row[at.column("rate")]);
        a.horizon = parse_double(row[at.column("horizon")]);
        a.asset_value = parse_double(row[at.column("asset_value")]);
        a.asset_vol = parse_double(row[at.column("asset_vol")]);
        a.classical_dd = parse_double(row[at.column("classical_dd")]);
        r.firm_groups[a.firm_id] = a.group;
        r.assets.push_back(a);
    }

    const CsvTable dt = read_csv(dir + "/dd_records.csv");
    for (const auto& row : dt.rows)
        r.records.push_back({{row[dt.column("firm_id")], row[dt.column("quarter")],
                              parse_model(row[dt.column("model")]), parse_double(row[dt.column("probability")]),
                              parse_double(row[dt.column("distance")])},
                             parse_group(row[dt.column("group")])});

    const CsvTable ft = read_csv(dir + "/fits.csv");
    for (const auto& row : ft.rows) {
        FitRecord f;
        f.group = parse_group(row[ft.column("group")]);
        f.scope = row[ft.column("scope")];
        f.fit.method = parse_method(row[ft.column("method")]);
        f.fit.beta = parse_double(row[ft.column("beta")]);
        f.fit.sse = parse_double(row[ft.column("sse")]);
        f.fit.n_obs = static_cast<std::size_t>(std::stoull(row[ft.column("n_obs")]));
        r.fits.push_back(f);
    }
    const CsvTable del = read_csv(dir + "/deltas.csv");
    for (const auto& row : del.rows) {
        const Group g = parse_group(row[del.column("group")]);
        const FitMethod method = parse_method(row[del.column("method")]);
        const std::string& scope = row[del.column("scope")];
        for (auto& f : r.fits)
            if (f.group == g && f.fit.method == method && f.scope == scope)
                f.fit.deltas[row[del.column("firm_id")]] = parse_double(row[del.column("delta")]);
    }

    const CsvTable et = read_csv(dir + "/exclusions.csv");
    for (const auto& row : et.rows) {
        Exclusion e;
        e.firm_id = row[et.column("firm_id")];
        e.group = parse_group(row[et.column("group")]);
        e.stage = row[et.column("stage")];
        e.reason = row[et.column("reason")];
        e.firm_quarters = static_cast<std::size_t>(std::stoull(row[et.column("firm_quarters")]));
        r.firm_groups[e.firm_id] = e.group;
        r.exclusions.push_back(e);
    }

    const CsvTable fl = read_csv(dir + "/fills.csv");
    for (const auto& row : fl.rows)
        r.fills.push_back({row[fl.column("firm_id")], row[fl.column("quarter")], row[fl.column("field")],
                           row[fl.column("source_quarter")]});
    return r;
}

}  // namespace cevkmv
