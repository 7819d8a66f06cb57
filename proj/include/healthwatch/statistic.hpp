#pragma once

#include <array>
#include <compare>
#include <string>
#include <string_view>

namespace healthwatch {

/// Percentiles emitted for feature and score distributions.
inline constexpr std::array<int, 5> kQuantilePercents{5, 25, 50, 75, 95};

class StatisticKind {
public:
    enum class Kind {
        mean,
        std,
        quantile,
        coverage_nondefault,
        coverage_nonmissing,
        score_mean,
        score_std,
        score_quantile,
        traffic,
        traffic_ratio,
    };

    constexpr StatisticKind() = default;
    constexpr StatisticKind(Kind kind, int percent = 0) : kind_(kind), percent_(percent) {}

    static constexpr StatisticKind feature_quantile(int percent) { return {Kind::quantile, percent}; }
    static constexpr StatisticKind score_quantile(int percent) { return {Kind::score_quantile, percent}; }

    constexpr Kind kind() const { return kind_; }
    constexpr int percent() const { return percent_; }

    bool is_coverage() const { return kind_ == Kind::coverage_nondefault || kind_ == Kind::coverage_nonmissing; }

    /// Canonical name used in files: "mean", "p25", "score_p95", "traffic_ratio", ...
    std::string name() const;
    static StatisticKind parse(std::string_view name);

    friend constexpr auto operator<=>(const StatisticKind&, const StatisticKind&) = default;

private:
    Kind kind_ = Kind::mean;
    int percent_ = 0;
};

} // namespace healthwatch
