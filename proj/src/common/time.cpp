#include "vitoria/time.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

#include "vitoria/error.hpp"

namespace vitoria {
namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len) {
    if (pos + len > text.size()) {
        throw Error(ErrorCode::Malformed, "truncated time value '" + std::string(text) + "'");
    }
    int value = 0;
    auto first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc{} || ptr != first + len) {
        throw Error(ErrorCode::Malformed, "bad digits in '" + std::string(text) + "'");
    }
    return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
    if (pos >= text.size() || text[pos] != c) {
        throw Error(ErrorCode::Malformed, "unexpected character in '" + std::string(text) + "'");
    }
}

Date checked_date(int y, int m, int d, std::string_view text) {
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) {
        throw Error(ErrorCode::Malformed, "invalid calendar date '" + std::string(text) + "'");
    }
    return date;
}

}  // namespace

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Malformed: return "Malformed";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::StaleUpdate: return "StaleUpdate";
        case ErrorCode::Unauthorized: return "Unauthorized";
        case ErrorCode::DuplicateDevice: return "DuplicateDevice";
        case ErrorCode::UnknownSeries: return "UnknownSeries";
        case ErrorCode::NonNumeric: return "NonNumeric";
        case ErrorCode::NotConfigured: return "NotConfigured";
        case ErrorCode::Offline: return "Offline";
        case ErrorCode::Unordered: return "Unordered";
        case ErrorCode::EmptyWindow: return "EmptyWindow";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::Expired: return "Expired";
        case ErrorCode::ValidationFailed: return "ValidationFailed";
        case ErrorCode::UnknownPrompt: return "UnknownPrompt";
        case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::OutOfSpan: return "OutOfSpan";
    }
    return "Unknown";
}

Date parse_date(std::string_view text) {
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        return checked_date(read_int(text, 0, 4), read_int(text, 5, 2), read_int(text, 8, 2), text);
    }
    if (text.size() == 10 && text[2] == '-' && text[5] == '-') {
        return checked_date(read_int(text, 6, 4), read_int(text, 3, 2), read_int(text, 0, 2), text);
    }
    throw Error(ErrorCode::Malformed, "unrecognised date '" + std::string(text) + "'");
}

std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

Timestamp parse_timestamp(std::string_view text) {
    if (text.size() == 10) {
        return start_of(parse_date(text));
    }
    if (text.size() < 19) {
        throw Error(ErrorCode::Malformed, "unrecognised timestamp '" + std::string(text) + "'");
    }
    const Date date = parse_date(text.substr(0, 10));
    if (text[10] != 'T' && text[10] != ' ') {
        throw Error(ErrorCode::Malformed, "missing 'T' in '" + std::string(text) + "'");
    }
    const int hh = read_int(text, 11, 2);
    expect(text, 13, ':');
    const int mm = read_int(text, 14, 2);
    expect(text, 16, ':');
    const int ss = read_int(text, 17, 2);
    if (hh > 23 || mm > 59 || ss > 60) {
        throw Error(ErrorCode::Malformed, "time of day out of range in '" + std::string(text) + "'");
    }
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    Seconds offset{0};
    if (pos < text.size() && text[pos] == 'Z') {
        ++pos;
    } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
        const int sign = text[pos] == '+' ? 1 : -1;
        const int oh = read_int(text, pos + 1, 2);
        expect(text, pos + 3, ':');
        const int om = read_int(text, pos + 4, 2);
        offset = Seconds{sign * (oh * 3600 + om * 60)};
        pos += 6;
    }
    if (pos != text.size()) {
        throw Error(ErrorCode::Malformed, "trailing characters in '" + std::string(text) + "'");
    }
    return at(date, hh, mm, ss) - offset;
}

std::string format_timestamp(Timestamp t) {
    const auto day = std::chrono::floor<std::chrono::days>(t);
    const Date d{day};
    const long secs = static_cast<long>((t - day).count());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()), secs / 3600,
                  (secs / 60) % 60, secs % 60);
    return buf;
}

}  // namespace vitoria
