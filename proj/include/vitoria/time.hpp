#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace vitoria {

/// All instants are UTC with one-second resolution.
using Timestamp = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;
using Date = std::chrono::year_month_day;

using namespace std::chrono_literals;

/// Parses "YYYY-MM-DDTHH:MM:SSZ" (offset suffix "+HH:MM" also accepted,
/// fractional seconds truncated) or a bare "YYYY-MM-DD" as midnight UTC.
/// Throws Error{ErrorCode::Malformed} on anything else.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

/// Accepts "YYYY-MM-DD" and "DD-MM-YYYY".
Date parse_date(std::string_view text);
std::string format_date(Date d);

inline Date date_of(Timestamp t) { return Date{std::chrono::floor<std::chrono::days>(t)}; }
inline Timestamp start_of(Date d) { return Timestamp{std::chrono::sys_days{d}}; }
inline Timestamp at(Date d, int hour, int minute = 0, int second = 0) {
    return start_of(d) + std::chrono::hours{hour} + std::chrono::minutes{minute} + Seconds{second};
}
inline Date add_days(Date d, int n) { return Date{std::chrono::sys_days{d} + std::chrono::days{n}}; }
inline int days_between(Date from, Date to) {
    return static_cast<int>((std::chrono::sys_days{to} - std::chrono::sys_days{from}).count());
}

/// 0 = Monday ... 6 = Sunday.
inline int weekday_index(Date d) {
    return static_cast<int>(std::chrono::weekday{std::chrono::sys_days{d}}.iso_encoding()) - 1;
}

/// Seconds since local midnight (the platform treats local time as UTC).
inline long seconds_of_day(Timestamp t) {
    return static_cast<long>((t - std::chrono::floor<std::chrono::days>(t)).count());
}

}  // namespace vitoria
