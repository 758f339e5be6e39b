#pragma once

#include "cevkmv/calendar.hpp"
#include "cevkmv/market_model.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cevkmv {

struct DailyReturn {
    Date date;
    double value = 0.0;  // simple return
};

/// One firm-quarter of balance-sheet and market data. Empty optionals are gaps.
struct FundamentalsRow {
    std::string firm_id;
    std::string quarter;
    std::optional<double> equity_value;
    std::optional<double> std_debt;
    std::optional<double> ltd_debt;
    Group group = Group::NonST;
};

struct RawInputs {
    /// Per firm, sorted by date.
    std::map<std::string, std::vector<DailyReturn>> daily_returns;
    std::vector<FundamentalsRow> fundamentals;
    /// Quarter label to continuously compounded rate.
    std::map<std::string, double> rates;
};

}  // namespace cevkmv
