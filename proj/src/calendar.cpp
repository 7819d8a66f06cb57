#include "healthwatch/calendar.hpp"

#include <charconv>

#include "healthwatch/error.hpp"

namespace healthwatch {

namespace {

int parse_int(std::string_view text, std::string_view whole) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DataError("invalid date '" + std::string(whole) + "'");
    }
    return value;
}

} // namespace

Day parse_iso_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw DataError("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
    }
    const int y = parse_int(text.substr(0, 4), text);
    const int m = parse_int(text.substr(5, 2), text);
    const int d = parse_int(text.substr(8, 2), text);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw DataError("invalid date '" + std::string(text) + "'");
    }
    return Day{ymd};
}

std::string format_iso_date(Day day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

Day day_from_epoch_ms(std::int64_t epoch_ms) {
    const std::chrono::sys_time<std::chrono::milliseconds> instant{std::chrono::milliseconds{epoch_ms}};
    return std::chrono::floor<std::chrono::days>(instant);
}

std::array<double, 7> day_of_week_onehot(Day day) {
    std::array<double, 7> onehot{};
    onehot[weekday_index(day)] = 1.0;
    return onehot;
}

} // namespace healthwatch
