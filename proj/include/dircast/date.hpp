#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <string>

namespace dircast {

// A calendar day, stored as days since 1970-01-01 (proleptic Gregorian).
// Cheap to copy and compare; conversion to y/m/d happens on demand.
class Date {
public:
    Date() = default;

    static Date from_ymd(int year, int month, int day);
    static Date from_serial(std::int32_t days) { return Date(days); }

    // Parses `text` with an strftime-style format, "%Y-%m-%d" by default.
    // The whole string must be consumed (trailing whitespace allowed).
    static Date parse(const std::string& text,
                      const std::string& format = "%Y-%m-%d");

    int year() const;
    int month() const;
    int day() const;
    std::int32_t serial() const { return days_; }

    std::string to_iso() const;

    Date next() const { return Date(days_ + 1); }
    Date prev() const { return Date(days_ - 1); }

    auto operator<=>(const Date&) const = default;

private:
    explicit Date(std::int32_t days) : days_(days) {}

    std::int32_t days_ = 0;
};

std::ostream& operator<<(std::ostream& os, const Date& d);

// Half-open interval [start, end).
struct DateInterval {
    Date start;
    Date end;

    bool contains(Date d) const { return start <= d && d < end; }
    bool empty() const { return end <= start; }
};

}  // namespace dircast
