#ifndef SLAFC_HOURS_HPP
#define SLAFC_HOURS_HPP

#include <cstdint>
#include <string>
#include <string_view>

namespace slafc {

// All timestamps in the toolkit are UTC hours since the Unix epoch.
// Keeping them as plain hour counts makes calendar math exact and cheap.
using EpochHour = std::int64_t;

// 0..23, UTC.
int hour_of_day(EpochHour h);

// 0 = Monday .. 6 = Sunday, UTC.
int day_of_week(EpochHour h);

bool is_weekend(EpochHour h);

// Parses "2023-01-02T13:00:00Z". Minutes and seconds must be zero.
// Throws Error(MalformedRow) on anything else.
EpochHour parse_hour_iso8601(std::string_view text);

std::string format_hour_iso8601(EpochHour h);

} // namespace slafc

#endif // SLAFC_HOURS_HPP
