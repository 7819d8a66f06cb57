#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace healthwatch {

/// Calendar day in UTC.
using Day = std::chrono::sys_days;

Day parse_iso_date(std::string_view text);
std::string format_iso_date(Day day);

/// UTC day containing the given epoch-millisecond instant.
Day day_from_epoch_ms(std::int64_t epoch_ms);

inline std::int64_t days_between(Day from, Day to) { return (to - from).count(); }

/// Monday = 0 ... Sunday = 6.
inline unsigned weekday_index(Day day) { return std::chrono::weekday{day}.iso_encoding() - 1; }

std::array<double, 7> day_of_week_onehot(Day day);

} // namespace healthwatch
