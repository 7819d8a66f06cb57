#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "healthwatch/health_stats.hpp"
#include "healthwatch/postprocess.hpp"
#include "healthwatch/series.hpp"

namespace healthwatch::io {

// Labeled dataset: one JSON object per line
//   {"model_id", "entity", "statistic", "start_date": "YYYY-MM-DD",
//    "values": [number|null, ...], "anomalies": [{"start": date, "end": date}, ...]}
nlohmann::json to_json(const LabeledSeries& record);
LabeledSeries labeled_series_from_json(const nlohmann::json& j);
void write_dataset(const std::filesystem::path& path, std::span<const LabeledSeries> dataset);
std::vector<LabeledSeries> read_dataset(const std::filesystem::path& path);

// Stats file: CSV with header model_id,entity,statistic,date,value; missing value = empty field.
void write_stats(std::ostream& out, std::span<const DailyStatRow> rows);
void write_stats(const std::filesystem::path& path, std::span<const DailyStatRow> rows);
std::vector<DailyStatRow> read_stats(std::istream& in);
std::vector<DailyStatRow> read_stats(const std::filesystem::path& path);

// Decisions file: JSON lines tagged by "record": "decision" | "interval".
nlohmann::json to_json(const DecisionRecord& d);
nlohmann::json to_json(const AnomalyInterval& interval);
nlohmann::json to_json(const ModelAlert& alert);
DecisionRecord decision_from_json(const nlohmann::json& j);
AnomalyInterval interval_from_json(const nlohmann::json& j);
ModelAlert alert_from_json(const nlohmann::json& j);

void write_decisions(const std::filesystem::path& path, std::span<const DecisionRecord> decisions,
                     std::span<const AnomalyInterval> intervals = {});
/// Decision records only; interval records are skipped.
std::vector<DecisionRecord> read_decisions(const std::filesystem::path& path);
std::vector<AnomalyInterval> read_intervals(const std::filesystem::path& path);

// Alerts file: one ModelAlert object per line.
void write_alerts(const std::filesystem::path& path, std::span<const ModelAlert> alerts);
std::vector<ModelAlert> read_alerts(const std::filesystem::path& path);

/// Reads every non-blank line of a JSON-lines file.
std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path);

} // namespace healthwatch::io
