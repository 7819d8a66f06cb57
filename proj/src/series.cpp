#include "healthwatch/series.hpp"

#include <algorithm>
#include <map>

#include "healthwatch/error.hpp"

namespace healthwatch {

std::optional<std::size_t> UnivariateSeries::index_of(Day day) const {
    const auto offset = days_between(start, day);
    if (offset < 0 || static_cast<std::size_t>(offset) >= values.size()) return std::nullopt;
    return static_cast<std::size_t>(offset);
}

bool LabeledSeries::is_labeled_anomalous(Day day) const {
    return std::ranges::any_of(labels, [day](const LabelInterval& l) { return l.contains(day); });
}

std::string_view to_string(WindowStatus status) {
    switch (status) {
    case WindowStatus::valid: return "valid";
    case WindowStatus::insufficient_history: return "insufficient history";
    case WindowStatus::missing_in_window: return "missing in window";
    case WindowStatus::missing_observation: return "missing observation";
    case WindowStatus::outside_series: return "outside series";
    }
    return "unknown";
}

std::vector<UnivariateSeries> build_series(std::span<const DailyStatRow> rows) {
    std::map<SeriesKey, std::map<Day, std::optional<double>>> grouped;
    for (const auto& row : rows) {
        SeriesKey key{row.model_id, row.entity, row.statistic};
        auto& slots = grouped[key];
        auto [it, inserted] = slots.emplace(row.date, row.value);
        if (!inserted && it->second != row.value) {
            throw DataError("conflicting values for " + key.to_string() + " on " + format_iso_date(row.date));
        }
    }
    std::vector<UnivariateSeries> out;
    out.reserve(grouped.size());
    for (auto& [key, slots] : grouped) {
        UnivariateSeries s;
        s.key = key;
        s.start = slots.begin()->first;
        s.values.resize(static_cast<std::size_t>(days_between(s.start, slots.rbegin()->first)) + 1);
        for (const auto& [day, value] : slots) s.values[static_cast<std::size_t>(days_between(s.start, day))] = value;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<DailyStatRow> flatten_series(std::span<const UnivariateSeries> series) {
    std::vector<DailyStatRow> rows;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            rows.push_back({s.key.model_id, s.key.entity, s.key.statistic, s.day_at(i), s.values[i]});
        }
    }
    return rows;
}

std::optional<int> select_horizon(std::int64_t history_length) {
    if (history_length < kShortHorizon) return std::nullopt;
    if (history_length < kLongHorizon) return kShortHorizon;
    return kLongHorizon;
}

namespace {

DetectionWindow fill_window(const UnivariateSeries& series, Day t, std::optional<int> horizon) {
    DetectionWindow w;
    w.key = series.key;
    w.target = t;
    w.seasonality = day_of_week_onehot(t);
    const auto index = series.index_of(t);
    if (!index) {
        w.status = WindowStatus::outside_series;
        return w;
    }
    if (!horizon || static_cast<std::size_t>(*horizon) > *index) {
        w.status = WindowStatus::insufficient_history;
        return w;
    }
    const std::size_t first = *index - static_cast<std::size_t>(*horizon);
    w.history.reserve(static_cast<std::size_t>(*horizon));
    bool gap = false;
    for (std::size_t i = first; i < *index; ++i) {
        const auto& v = series.values[i];
        gap = gap || !v.has_value();
        w.history.push_back(v.value_or(0.0));
    }
    const auto& obs = series.values[*index];
    w.observed = obs.value_or(0.0);
    if (gap) {
        w.status = WindowStatus::missing_in_window;
    } else if (!obs) {
        w.status = WindowStatus::missing_observation;
    } else {
        w.status = WindowStatus::valid;
    }
    return w;
}

} // namespace

DetectionWindow build_window(const UnivariateSeries& series, Day t) {
    const auto index = series.index_of(t);
    return fill_window(series, t, index ? select_horizon(static_cast<std::int64_t>(*index)) : std::nullopt);
}

DetectionWindow build_window_with_horizon(const UnivariateSeries& series, Day t, int horizon) {
    if (horizon < 1) throw UsageError("horizon must be positive");
    return fill_window(series, t, horizon);
}

} // namespace healthwatch
