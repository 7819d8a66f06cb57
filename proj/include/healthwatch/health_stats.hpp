#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "healthwatch/calendar.hpp"
#include "healthwatch/statistic.hpp"

namespace healthwatch {

/// Entity name under which output-score statistics are reported.
inline constexpr std::string_view kScoreEntity = "__score__";
/// Entity name for model-level metadata (traffic, traffic ratio).
inline constexpr std::string_view kModelEntity = "__model__";

/// A feature value as logged: absent/null, scalar, categorical or an embedding vector.
using FeatureValue = std::variant<std::monostate, double, std::string, std::vector<double>>;

struct ScoringEvent {
    std::string model_id;
    std::string product_id;
    std::int64_t timestamp_ms = 0;
    std::map<std::string, FeatureValue> features;
    double score = 0.0;
};

struct DailyStatRow {
    std::string model_id;
    std::string entity;
    StatisticKind statistic;
    Day date;
    std::optional<double> value;

    friend bool operator==(const DailyStatRow&, const DailyStatRow&) = default;
};

struct ParseResult {
    std::vector<ScoringEvent> events;
    std::size_t rejects = 0;
};

/// Decodes one event-log record. Throws DataError describing the schema violation.
ScoringEvent parse_event_line(std::string_view line);

/// Reads a newline-delimited event log. Malformed lines are counted in `rejects` and
/// skipped, or abort with DataError when `strict` is set. Blank lines are ignored.
ParseResult parse_events(std::istream& in, bool strict = false);
ParseResult parse_events(const std::filesystem::path& path, bool strict = false);

/// Categorical c -> {name=c: 1.0}; vector v -> {name[i]: v[i]}. Scalars and missing values yield nothing.
std::vector<std::pair<std::string, double>> expand_nonscalar_feature(const std::string& name, const FeatureValue& value);

struct AggregationConfig {
    double default_value = 0.0;
    /// Per-feature override of the default used by coverage_nondefault.
    std::map<std::string, double> feature_defaults;
    /// OpenMP worker count; 0 uses the runtime default.
    int workers = 0;

    double default_for(const std::string& feature) const;
};

/// Daily per-(model, entity) statistics. Rows are sorted by (model, date, entity, statistic).
std::vector<DailyStatRow> aggregate_daily(std::span<const ScoringEvent> events, const AggregationConfig& config = {});

/// Single-threaded reference for aggregate_daily; identical output.
std::vector<DailyStatRow> aggregate_daily_serial(std::span<const ScoringEvent> events,
                                                 const AggregationConfig& config = {});

/// Model -> product assignment observed in the events. Throws DataError when a model
/// is logged under more than one product.
std::map<std::string, std::string> model_products(std::span<const ScoringEvent> events);

/// traffic_ratio rows from traffic rows: share of each model's traffic within its product on a day.
/// Product-days with zero total traffic yield missing ratios.
std::vector<DailyStatRow> compute_traffic_ratio(std::span<const DailyStatRow> traffic_rows,
                                                const std::map<std::string, std::string>& model_to_product);

/// Nearest-rank percentile of an ascending sample: element ceil(p/100 * n) (1-based).
double nearest_rank(std::span<const double> sorted, int percent);

} // namespace healthwatch
