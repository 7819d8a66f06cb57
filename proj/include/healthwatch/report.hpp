#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "healthwatch/health_stats.hpp"
#include "healthwatch/postprocess.hpp"
#include "healthwatch/series.hpp"

namespace healthwatch::report {

/// model_id -> entity -> importance score (finite, >= 0).
class ImportanceConfig {
public:
    void set(const std::string& model, const std::string& entity, double score);
    std::optional<double> get(const std::string& model, const std::string& entity) const;
    bool empty() const { return scores_.empty(); }

    /// JSON object {"<model>": {"<entity>": score, ...}, ...}.
    static ImportanceConfig load(const std::filesystem::path& path);

private:
    std::map<std::string, std::map<std::string, double>> scores_;
};

/// Observed values of one series around an alert plus the forecasts made for it.
struct SeriesSlice {
    SeriesKey key;
    Day start;
    std::vector<std::optional<double>> values;
    std::vector<DecisionRecord> forecasts;   ///< decisions dated inside the slice
    std::vector<AnomalyInterval> intervals;  ///< surviving intervals of this series

    Day day_at(std::size_t i) const { return start + std::chrono::days{static_cast<long>(i)}; }
};

struct TrafficPoint {
    Day date;
    std::optional<double> traffic;
    std::optional<double> ratio;
};

struct EntityImportance {
    std::string entity;
    std::optional<double> score;
};

struct ReportBundle {
    ModelAlert alert;
    std::vector<SeriesSlice> slices;
    std::vector<EntityImportance> importance;  ///< sorted descending, unknown last
    std::vector<TrafficPoint> traffic;
    std::string generated_at;
};

/// Days of context drawn before an alert and after it.
inline constexpr int kContextBefore = 28;
inline constexpr int kContextAfter = 7;

/// Collects everything the report shows from the stats and decisions files. Series absent from
/// the stats fall back to the observed values recorded in the decisions.
ReportBundle build_bundle(const ModelAlert& alert, std::span<const DailyStatRow> stats,
                          std::span<const DecisionRecord> decisions, const ImportanceConfig& importance,
                          std::string generated_at);

/// Known scores descending (ties by name), then unknown ones by name.
std::vector<EntityImportance> rank_importance(const std::vector<std::string>& entities, const std::string& model,
                                              const ImportanceConfig& importance);

/// SVG fragment: observed line, baseline line, one band rect per forecast day, anomalous days marked.
/// The y range covers every plotted value padded by 5% of its span (span taken as max(|v|, 1) when flat).
std::string plot_series_svg(const SeriesSlice& slice);

/// Self-contained HTML document for one alert.
std::string render_report(const ReportBundle& bundle);

/// <model>_<start>_<end>.html with unsafe characters replaced.
std::string report_file_name(const ModelAlert& alert);

/// Writes the report, replacing an existing file. Throws DataError when the path is unwritable.
void write_report(const ReportBundle& bundle, const std::filesystem::path& path);

std::string html_escape(std::string_view text);

} // namespace healthwatch::report
