#include "slafc/hours.hpp"

#include <charconv>
#include <cstdio>

#include "slafc/error.hpp"

namespace slafc {

namespace {

// Euclidean floor division/modulo so pre-1970 hours behave too.
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - floor_div(a, b) * b; }

// Days-from-civil / civil-from-days (Howard Hinnant's algorithms).
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = floor_div(y, 400);
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = floor_div(z, 146097);
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yr + (m <= 2));
}

int parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
    if (ec != std::errc{} || ptr != text.data() + pos + len) {
        fail(Errc::MalformedRow, "bad timestamp field in '" + std::string(text) + "'");
    }
    return value;
}

} // namespace

int hour_of_day(EpochHour h) { return static_cast<int>(floor_mod(h, 24)); }

int day_of_week(EpochHour h) {
    // 1970-01-01 was a Thursday; shift so Monday = 0.
    return static_cast<int>(floor_mod(floor_div(h, 24) + 3, 7));
}

bool is_weekend(EpochHour h) { return day_of_week(h) >= 5; }

EpochHour parse_hour_iso8601(std::string_view text) {
    // Expected shape: YYYY-MM-DDThh:00:00Z
    if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
        text[13] != ':' || text[16] != ':' || text[19] != 'Z') {
        fail(Errc::MalformedRow, "bad timestamp '" + std::string(text) + "'");
    }
    const int year = parse_fixed_int(text, 0, 4);
    const int month = parse_fixed_int(text, 5, 2);
    const int day = parse_fixed_int(text, 8, 2);
    const int hour = parse_fixed_int(text, 11, 2);
    const int minute = parse_fixed_int(text, 14, 2);
    const int second = parse_fixed_int(text, 17, 2);
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23) {
        fail(Errc::MalformedRow, "out-of-range timestamp '" + std::string(text) + "'");
    }
    if (minute != 0 || second != 0) {
        fail(Errc::MalformedRow,
             "timestamp not aligned to an hour boundary: '" + std::string(text) + "'");
    }
    return days_from_civil(year, month, day) * 24 + hour;
}

std::string format_hour_iso8601(EpochHour h) {
    int y = 0, m = 0, d = 0;
    civil_from_days(floor_div(h, 24), y, m, d);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:00:00Z", y, m, d, hour_of_day(h));
    return buf;
}

} // namespace slafc
