#include "dircast/date.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dircast/errors.hpp"

namespace dircast {

namespace {

// Howard Hinnant's civil-date algorithms.
std::int32_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy =
        (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
        static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int>(doe) - 719468;
}

struct Civil {
    int year;
    int month;
    int day;
};

Civil civil_from_days(std::int32_t z) {
    z += 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return Civil{y + (m <= 2), static_cast<int>(m), static_cast<int>(d)};
}

bool valid_ymd(int year, int month, int day) {
    if (month < 1 || month > 12 || day < 1) return false;
    static constexpr std::array<int, 12> len = {31, 28, 31, 30, 31, 30,
                                                31, 31, 30, 31, 30, 31};
    int max_day = len[static_cast<std::size_t>(month - 1)];
    const bool leap =
        year % 4 == 0 && (year % 100 != 0 || year % 400 == 0);
    if (month == 2 && leap) max_day = 29;
    return day <= max_day;
}

// Fast path for the default ISO format: exactly YYYY-MM-DD.
bool parse_iso(const std::string& text, int& y, int& m, int& d) {
    std::size_t n = text.size();
    while (n > 0 && std::isspace(static_cast<unsigned char>(text[n - 1]))) --n;
    if (n != 10 || text[4] != '-' || text[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    }
    y = (text[0] - '0') * 1000 + (text[1] - '0') * 100 + (text[2] - '0') * 10 +
        (text[3] - '0');
    m = (text[5] - '0') * 10 + (text[6] - '0');
    d = (text[8] - '0') * 10 + (text[9] - '0');
    return true;
}

}  // namespace

Date Date::from_ymd(int year, int month, int day) {
    if (!valid_ymd(year, month, day)) {
        throw ValidationError("invalid calendar date: year=" +
                              std::to_string(year) + " month=" +
                              std::to_string(month) + " day=" +
                              std::to_string(day));
    }
    return Date(days_from_civil(year, month, day));
}

Date Date::parse(const std::string& text, const std::string& format) {
    int y = 0, m = 0, d = 0;
    if (format == "%Y-%m-%d") {
        if (!parse_iso(text, y, m, d)) {
            throw ParseError("unparsable date '" + text +
                             "' (expected YYYY-MM-DD)");
        }
    } else {
        std::tm tm{};
        std::istringstream in(text);
        in >> std::get_time(&tm, format.c_str());
        if (in.fail()) {
            throw ParseError("unparsable date '" + text + "' for format '" +
                             format + "'");
        }
        in >> std::ws;
        if (in.peek() != std::char_traits<char>::eof()) {
            throw ParseError("trailing characters after date in '" + text +
                             "'");
        }
        y = tm.tm_year + 1900;
        m = tm.tm_mon + 1;
        d = tm.tm_mday;
    }
    if (!valid_ymd(y, m, d)) {
        throw ParseError("date '" + text + "' is not a real calendar day");
    }
    return Date(days_from_civil(y, m, d));
}

int Date::year() const { return civil_from_days(days_).year; }
int Date::month() const { return civil_from_days(days_).month; }
int Date::day() const { return civil_from_days(days_).day; }

std::string Date::to_iso() const {
    const Civil c = civil_from_days(days_);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", c.year, c.month, c.day);
    return buf;
}

std::ostream& operator<<(std::ostream& os, const Date& d) {
    return os << d.to_iso();
}

}  // namespace dircast
