#include "cevkmv/calendar.hpp"

#include "cevkmv/errors.hpp"

#include <cstdio>
#include <regex>

namespace cevkmv {

using namespace std::chrono;

Date parse_date(const std::string& text) {
    static const std::regex pattern(R"((\d{4})-(\d{2})-(\d{2}))");
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) throw ValidationError("malformed date '" + text + "'");
    const year_month_day ymd{year{std::stoi(m[1])}, month{static_cast<unsigned>(std::stoi(m[2]))},
                             day{static_cast<unsigned>(std::stoi(m[3]))}};
    if (!ymd.ok()) throw ValidationError("invalid date '" + text + "'");
    return sys_days{ymd};
}

std::string format_date(Date d) {
    const year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

bool is_weekday(Date d) {
    const weekday w{d};
    return w != Saturday && w != Sunday;
}

Quarter parse_quarter(const std::string& label) {
    static const std::regex pattern(R"((\d{4})Q([1-4]))");
    std::smatch m;
    if (!std::regex_match(label, m, pattern))
        throw ValidationError("malformed quarter '" + label + "' (expected e.g. 2019Q1)");
    return {std::stoi(m[1]), std::stoi(m[2])};
}

std::string to_string(const Quarter& q) {
    return std::to_string(q.year) + "Q" + std::to_string(q.q);
}

Quarter next(const Quarter& q) {
    return q.q == 4 ? Quarter{q.year + 1, 1} : Quarter{q.year, q.q + 1};
}

int quarters_between(const Quarter& a, const Quarter& b) {
    return (b.year - a.year) * 4 + (b.q - a.q);
}

Date quarter_end(const Quarter& q) {
    const month last{static_cast<unsigned>(3 * q.q)};
    return sys_days{year{q.year} / last / std::chrono::last};
}

Date quarter_start(const Quarter& q) {
    return sys_days{year{q.year} / month{static_cast<unsigned>(3 * q.q - 2)} / day{1}};
}

}  // namespace cevkmv
