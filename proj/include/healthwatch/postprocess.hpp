#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "healthwatch/detector.hpp"
#include "healthwatch/health_stats.hpp"
#include "healthwatch/series.hpp"

namespace healthwatch {

/// One pointwise decision as stored in decisions files.
struct DecisionRecord {
    SeriesKey key;
    Day date;
    int horizon = 0;
    double observed = 0.0;
    double baseline = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double anomaly_probability = 0.0;
    double severity = 0.0;
    bool out_of_boundary = false;
    bool is_anomaly = false;

    static DecisionRecord from_point(const SeriesKey& key, Day date, int horizon, const PointDecision& d);
    friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

enum class Pattern { spike, level_shift, ongoing };
std::string_view to_string(Pattern p);
Pattern parse_pattern(std::string_view text);

/// Days an anomaly may last and still count as a spike.
inline constexpr int kSpikeMaxDays = 3;

/// Outcome of each filter for one interval; nullopt when the filter was disabled.
struct FilterTrace {
    std::optional<bool> duration;
    std::optional<bool> severity;
    std::optional<bool> concurrency;
    std::optional<bool> mtr;

    bool passed() const {
        return duration.value_or(true) && severity.value_or(true) && concurrency.value_or(true) && mtr.value_or(true);
    }
    friend bool operator==(const FilterTrace&, const FilterTrace&) = default;
};

struct AnomalyInterval {
    SeriesKey key;
    Day start;
    Day end;
    int duration = 0;  ///< anomalous days in [start, end]
    double max_severity = 0.0;
    Pattern pattern = Pattern::ongoing;
    std::vector<double> severities;
    FilterTrace trace;

    bool overlaps(Day from, Day to) const { return start <= to && from <= end; }
    friend bool operator==(const AnomalyInterval&, const AnomalyInterval&) = default;
};

/// Maximal runs of anomalous decisions on consecutive calendar days of one series.
/// Days without a decision break a run. Patterns are classified against the same decisions.
std::vector<AnomalyInterval> merge_points_to_intervals(std::span<const DecisionRecord> series_decisions);

/// Spike when the run lasts <= 3 days and the next day has a normal decision; level shift when
/// it lasts longer; ongoing when a short run reaches the end of the available decisions.
Pattern classify_pattern(const AnomalyInterval& interval, std::span<const DecisionRecord> series_decisions);

bool duration_filter(const AnomalyInterval& interval, int min_duration);
bool severity_filter(const AnomalyInterval& interval, double min_severity);
/// Keep iff abnormal/total >= threshold; a disabled filter (nullopt) always keeps.
bool concurrency_filter(std::size_t abnormal, std::size_t total, std::optional<double> threshold);
/// Keep iff ratio >= threshold; a missing ratio keeps.
bool mtr_filter(std::optional<double> traffic_ratio, double threshold);

struct FilterConfig {
    bool duration_enabled = true;
    int duration = 2;
    bool severity_enabled = true;
    double severity = 1.3;
    bool concurrency_enabled = false;
    double concurrency = 0.0;
    bool mtr_enabled = true;
    double mtr = 0.03;

    static FilterConfig all_disabled();
    /// JSON object with any subset of the fields above, e.g. {"duration": 3, "mtr_enabled": false}.
    static FilterConfig load(const std::filesystem::path& path);
    void validate() const;
};

/// Per model-day facts the model-level filters need.
class ModelDayContext {
public:
    /// Builds concurrency counts (abnormal vs. monitored series per model-day) from decisions
    /// and traffic ratios from traffic_ratio stat rows.
    static ModelDayContext from(std::span<const DecisionRecord> decisions, std::span<const DailyStatRow> stats);

    std::optional<double> traffic_ratio(const std::string& model, Day day) const;
    /// Largest abnormal/total fraction of the model over [from, to]; 1 when nothing was monitored.
    double max_concurrency(const std::string& model, Day from, Day to) const;
    std::pair<std::size_t, std::size_t> counts(const std::string& model, Day day) const;

private:
    std::map<std::pair<std::string, Day>, std::pair<std::size_t, std::size_t>> counts_;
    std::map<std::pair<std::string, Day>, std::optional<double>> ratios_;
};

/// Fills each interval's filter trace. Returns the intervals in input order.
std::vector<AnomalyInterval> apply_filters(std::vector<AnomalyInterval> intervals, const FilterConfig& config,
                                           const ModelDayContext& context);

enum class GroupingRule { any_entity, entity_subset };
std::string_view to_string(GroupingRule rule);

struct ModelAlert {
    std::string model_id;
    Day start;
    Day end;
    std::vector<AnomalyInterval> intervals;
    std::optional<double> traffic_ratio;
    GroupingRule rule = GroupingRule::any_entity;
};

/// Model-level alerts from surviving intervals: per model, intervals whose date ranges overlap
/// (transitively) are bundled into one alert. With entity_subset only the listed entities can alert.
std::vector<ModelAlert> group_to_model(std::span<const AnomalyInterval> intervals, GroupingRule rule,
                                       const std::set<std::string>& entity_subset = {},
                                       const ModelDayContext* context = nullptr);

struct PostprocessResult {
    std::vector<AnomalyInterval> intervals;  ///< every merged interval with its filter trace
    std::vector<ModelAlert> alerts;
};

/// Merge per series, filter, then group to model alerts.
PostprocessResult postprocess(std::span<const DecisionRecord> decisions, const FilterConfig& config,
                              const ModelDayContext& context, GroupingRule rule = GroupingRule::any_entity,
                              const std::set<std::string>& entity_subset = {});

} // namespace healthwatch
