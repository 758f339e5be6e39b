#pragma once

#include "cevkmv/inputs.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace cevkmv {

struct CsvTable {
    std::string source;  // for error messages
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    /// Index of a header column; ValidationError if absent.
    std::size_t column(const std::string& name) const;
};

/// Comma separated, header row required, double quotes allowed around fields.
CsvTable parse_csv(std::istream& in, const std::string& source);
CsvTable read_csv(const std::string& path);

/// Writes with '\n' line endings; fields containing ',' or '"' are quoted.
void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Returns: firm_id,date,return. Fundamentals: firm_id,quarter,equity_value,
/// std_debt,ltd_debt,group (empty numeric cells are gaps). Rates: quarter,rate.
/// Throws ValidationError with file and line on any malformed content.
RawInputs load_inputs(const std::string& returns_path, const std::string& fundamentals_path,
                      const std::string& rates_path);

/// Writes returns.csv, fundamentals.csv and rates.csv into `dir`.
void write_inputs(const RawInputs& inputs, const std::string& dir);

}  // namespace cevkmv
