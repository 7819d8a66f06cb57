#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "healthwatch/calendar.hpp"
#include "healthwatch/health_stats.hpp"
#include "healthwatch/statistic.hpp"

namespace healthwatch {

struct SeriesKey {
    std::string model_id;
    std::string entity;
    StatisticKind statistic;

    std::string to_string() const { return model_id + "/" + entity + "/" + statistic.name(); }
    friend auto operator<=>(const SeriesKey&, const SeriesKey&) = default;
};

/// Daily values indexed densely from `start`; gaps are empty optionals.
struct UnivariateSeries {
    SeriesKey key;
    Day start;
    std::vector<std::optional<double>> values;

    std::size_t size() const { return values.size(); }
    Day day_at(std::size_t index) const { return start + std::chrono::days{static_cast<long>(index)}; }
    Day end() const { return day_at(values.empty() ? 0 : values.size() - 1); }
    /// Index of `day`, or nullopt when outside the series.
    std::optional<std::size_t> index_of(Day day) const;
};

/// Inclusive range of labeled anomalous days.
struct LabelInterval {
    Day start;
    Day end;

    std::int64_t length() const { return days_between(start, end) + 1; }
    bool contains(Day day) const { return start <= day && day <= end; }
    friend bool operator==(const LabelInterval&, const LabelInterval&) = default;
};

/// One record of the labeled dataset format: a series and its anomaly labels.
struct LabeledSeries {
    UnivariateSeries series;
    std::vector<LabelInterval> labels;

    bool is_labeled_anomalous(Day day) const;
};

enum class WindowStatus { valid, insufficient_history, missing_in_window, missing_observation, outside_series };

std::string_view to_string(WindowStatus status);

struct DetectionWindow {
    SeriesKey key;
    Day target;
    std::vector<double> history;  ///< days t-H ... t-1, oldest first
    std::array<double, 7> seasonality{};
    double observed = 0.0;
    WindowStatus status = WindowStatus::insufficient_history;

    bool valid() const { return status == WindowStatus::valid; }
    int horizon() const { return static_cast<int>(history.size()); }
};

inline constexpr int kShortHorizon = 14;
inline constexpr int kLongHorizon = 28;

/// Groups rows into dense daily series. Identical duplicate rows are tolerated;
/// conflicting duplicates throw DataError naming the key and date.
std::vector<UnivariateSeries> build_series(std::span<const DailyStatRow> rows);

/// Inverse of build_series: one row per present-or-missing slot.
std::vector<DailyStatRow> flatten_series(std::span<const UnivariateSeries> series);

/// 14 for 14..27 days of history, 28 for 28 or more, nullopt (skip) below 14.
std::optional<int> select_horizon(std::int64_t history_length);

/// Window at `t` with the horizon chosen from the history available before t.
DetectionWindow build_window(const UnivariateSeries& series, Day t);

/// Window at `t` with a fixed horizon; invalid when fewer than `horizon` days precede t.
DetectionWindow build_window_with_horizon(const UnivariateSeries& series, Day t, int horizon);

} // namespace healthwatch
