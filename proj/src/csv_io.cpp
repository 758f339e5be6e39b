#include "cevkmv/csv_io.hpp"

#include "cevkmv/config.hpp"
#include "cevkmv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

namespace cevkmv {

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError(source + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& where) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted) throw ValidationError(where + ": unterminated quote");
    out.push_back(field);
    return out;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

std::string where(const CsvTable& t, std::size_t row) {
    return t.source + ":" + std::to_string(t.line_numbers[row]);
}

double number_at(const CsvTable& t, std::size_t row, std::size_t col) {
    const std::string& text = t.rows[row][col];
    double v = 0.0;
    try {
        v = parse_double(text);
    } catch (const ValidationError&) {
        throw ValidationError(where(t, row) + ": '" + t.header[col] + "' is not a number: '" + text + "'");
    }
    if (!std::isfinite(v))
        throw ValidationError(where(t, row) + ": '" + t.header[col] + "' must be finite");
    return v;
}

}  // namespace

CsvTable parse_csv(std::istream& in, const std::string& source) {
    CsvTable t;
    t.source = source;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (line.empty()) continue;
        auto fields = split_line(line, source + ":" + std::to_string(lineno));
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw ValidationError(source + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(t.header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(lineno);
    }
    if (!have_header) throw ValidationError(source + ": empty file (header row required)");
    return t;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    return parse_csv(in, path);
}

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    auto emit = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << quote(r[i]);
        out << '\n';
    };
    emit(header);
    for (const auto& r : rows) emit(r);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_csv(out, header, rows);
}

RawInputs load_inputs(const std::string& returns_path, const std::string& fundamentals_path,
                      const std::string& rates_path) {
    RawInputs in;

    const CsvTable rt = read_csv(returns_path);
    const std::size_t r_firm = rt.column("firm_id"), r_date = rt.column("date"),
                      r_ret = rt.column("return");
    for (std::size_t i = 0; i < rt.rows.size(); ++i) {
        const auto& row = rt.rows[i];
        if (row[r_firm].empty()) throw ValidationError(where(rt, i) + ": empty firm_id");
        Date d;
        try {
            d = parse_date(row[r_date]);
        } catch (const ValidationError& e) {
            throw ValidationError(where(rt, i) + ": " + e.what());
        }
        const double r = number_at(rt, i, r_ret);
        if (!(r > -1.0)) throw ValidationError(where(rt, i) + ": return must exceed -1");
        in.daily_returns[row[r_firm]].push_back({d, r});
    }
    for (auto& [firm, series] : in.daily_returns) {
        std::stable_sort(series.begin(), series.end(),
                         [](const DailyReturn& a, const DailyReturn& b) { return a.date < b.date; });
        for (std::size_t k = 1; k < series.size(); ++k)
            if (series[k].date == series[k - 1].date)
                throw ValidationError(returns_path + ": duplicate date " +
                                      format_date(series[k].date) + " for firm " + firm);
    }

    const CsvTable ft = read_csv(fundamentals_path);
    const std::size_t f_firm = ft.column("firm_id"), f_q = ft.column("quarter"),
                      f_eq = ft.column("equity_value"), f_std = ft.column("std_debt"),
                      f_ltd = ft.column("ltd_debt"), f_group = ft.column("group");
    std::set<std::pair<std::string, std::string>> seen;
    std::map<std::string, Group> groups;
    for (std::size_t i = 0; i < ft.rows.size(); ++i) {
        const auto& row = ft.rows[i];
        FundamentalsRow f;
        f.firm_id = row[f_firm];
        if (f.firm_id.empty()) throw ValidationError(where(ft, i) + ": empty firm_id");
        try {
            f.quarter = to_string(parse_quarter(row[f_q]));
            f.group = parse_group(row[f_group]);
        } catch (const ValidationError& e) {
            throw ValidationError(where(ft, i) + ": " + e.what());
        }
        auto optional_number = [&](std::size_t col) -> std::optional<double> {
            if (row[col].empty()) return std::nullopt;
            const double v = number_at(ft, i, col);
            if (v < 0.0) throw ValidationError(where(ft, i) + ": '" + ft.header[col] + "' must be >= 0");
            return v;
        };
        f.equity_value = optional_number(f_eq);
        f.std_debt = optional_number(f_std);
        f.ltd_debt = optional_number(f_ltd);
        if (f.equity_value && *f.equity_value <= 0.0)
            throw ValidationError(where(ft, i) + ": equity_value must be > 0");
        if (!seen.insert({f.firm_id, f.quarter}).second)
            throw ValidationError(where(ft, i) + ": duplicate row for " + f.firm_id + " " + f.quarter);
        const auto [it, fresh] = groups.emplace(f.firm_id, f.group);
        if (!fresh && it->second != f.group)
            throw ValidationError(where(ft, i) + ": firm " + f.firm_id + " changes group");
        in.fundamentals.push_back(f);
    }

    const CsvTable qt = read_csv(rates_path);
    const std::size_t q_q = qt.column("quarter"), q_rate = qt.column("rate");
    for (std::size_t i = 0; i < qt.rows.size(); ++i) {
        std::string label;
        try {
            label = to_string(parse_quarter(qt.rows[i][q_q]));
        } catch (const ValidationError& e) {
            throw ValidationError(where(qt, i) + ": " + e.what());
        }
        if (!in.rates.emplace(label, number_at(qt, i, q_rate)).second)
            throw ValidationError(where(qt, i) + ": duplicate rate for " + label);
    }
    return in;
}

void write_inputs(const RawInputs& inputs, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::vector<std::string>> rows;
    for (const auto& [firm, series] : inputs.daily_returns)
        for (const auto& r : series) rows.push_back({firm, format_date(r.date), format_double(r.value)});
    write_csv(dir + "/returns.csv", {"firm_id", "date", "return"}, rows);

    rows.clear();
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& f : inputs.fundamentals)
        rows.push_back({f.firm_id, f.quarter, cell(f.equity_value), cell(f.std_debt),
                        cell(f.ltd_debt), to_string(f.group)});
    write_csv(dir + "/fundamentals.csv",
              {"firm_id", "quarter", "equity_value", "std_debt", "ltd_debt", "group"}, rows);

    rows.clear();
    for (const auto& [q, r] : inputs.rates) rows.push_back({q, format_double(r)});
    write_csv(dir + "/rates.csv", {"quarter", "rate"}, rows);
}

}  // namespace cevkmv
