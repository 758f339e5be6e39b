#pragma once

#include <chrono>
#include <string>

namespace cevkmv {

using Date = std::chrono::sys_days;

/// ISO yyyy-mm-dd. Throws ValidationError on malformed or impossible dates.
Date parse_date(const std::string& text);
std::string format_date(Date d);

bool is_weekday(Date d);

/// Calendar quarter written as e.g. "2019Q1".
struct Quarter {
    int year = 0;
    int q = 1;

    auto operator<=>(const Quarter&) const = default;
};

Quarter parse_quarter(const std::string& label);
std::string to_string(const Quarter& q);
Quarter next(const Quarter& q);
/// Number of quarters from a to b (b - a).
int quarters_between(const Quarter& a, const Quarter& b);
/// Last calendar day of the quarter.
Date quarter_end(const Quarter& q);
Date quarter_start(const Quarter& q);

}  // namespace cevkmv
