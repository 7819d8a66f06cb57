#include "healthwatch/postprocess.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "healthwatch/error.hpp"

namespace healthwatch {

DecisionRecord DecisionRecord::from_point(const SeriesKey& key, Day date, int horizon, const PointDecision& d) {
    DecisionRecord r;
    r.key = key;
    r.date = date;
    r.horizon = horizon;
    r.observed = d.observed;
    r.baseline = d.forecast.baseline;
    r.lower = d.forecast.lower;
    r.upper = d.forecast.upper;
    r.anomaly_probability = d.anomaly_probability;
    r.severity = d.severity;
    r.out_of_boundary = d.out_of_boundary;
    r.is_anomaly = d.is_anomaly;
    return r;
}

std::string_view to_string(Pattern p) {
    switch (p) {
    case Pattern::spike: return "spike";
    case Pattern::level_shift: return "level_shift";
    case Pattern::ongoing: return "ongoing";
    }
    return "ongoing";
}

Pattern parse_pattern(std::string_view text) {
    if (text == "spike") return Pattern::spike;
    if (text == "level_shift") return Pattern::level_shift;
    if (text == "ongoing") return Pattern::ongoing;
    throw DataError("unknown anomaly pattern '" + std::string(text) + "'");
}

namespace {

std::vector<DecisionRecord> sorted_by_date(std::span<const DecisionRecord> decisions) {
    std::vector<DecisionRecord> out(decisions.begin(), decisions.end());
    std::ranges::sort(out, {}, &DecisionRecord::date);
    return out;
}

} // namespace

Pattern classify_pattern(const AnomalyInterval& interval, std::span<const DecisionRecord> series_decisions) {
    if (interval.duration > kSpikeMaxDays) return Pattern::level_shift;
    const Day next = interval.end + std::chrono::days{1};
    const auto it = std::ranges::find(series_decisions, next, &DecisionRecord::date);
    if (it != series_decisions.end() && !it->is_anomaly) return Pattern::spike;
    return Pattern::ongoing;
}

std::vector<AnomalyInterval> merge_points_to_intervals(std::span<const DecisionRecord> series_decisions) {
    const auto decisions = sorted_by_date(series_decisions);
    std::vector<AnomalyInterval> out;
    std::optional<AnomalyInterval> open;
    auto close = [&] {
        if (open) {
            open->max_severity = *std::ranges::max_element(open->severities);
            out.push_back(std::move(*open));
            open.reset();
        }
    };
    for (const auto& d : decisions) {
        if (!d.is_anomaly) {
            close();
            continue;
        }
        if (open && open->end + std::chrono::days{1} == d.date) {
            open->end = d.date;
            ++open->duration;
            open->severities.push_back(d.severity);
        } else {
            close();
            open = AnomalyInterval{d.key, d.date, d.date, 1, 0.0, Pattern::ongoing, {d.severity}, {}};
        }
    }
    close();
    for (auto& interval : out) interval.pattern = classify_pattern(interval, decisions);
    return out;
}

bool duration_filter(const AnomalyInterval& interval, int min_duration) { return interval.duration >= min_duration; }

bool severity_filter(const AnomalyInterval& interval, double min_severity) {
    return interval.max_severity >= min_severity;
}

bool concurrency_filter(std::size_t abnormal, std::size_t total, std::optional<double> threshold) {
    if (!threshold) return true;
    if (total == 0) return true;
    return static_cast<double>(abnormal) / static_cast<double>(total) >= *threshold;
}

bool mtr_filter(std::optional<double> traffic_ratio, double threshold) {
    return !traffic_ratio || *traffic_ratio >= threshold;
}

FilterConfig FilterConfig::all_disabled() {
    FilterConfig c;
    c.duration_enabled = c.severity_enabled = c.concurrency_enabled = c.mtr_enabled = false;
    return c;
}

void FilterConfig::validate() const {
    if (duration < 0 || severity < 0.0 || concurrency < 0.0 || concurrency > 1.0 || mtr < 0.0)
        throw UsageError("filter thresholds must be non-negative (concurrency within [0, 1])");
}

FilterConfig FilterConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read filter config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("filter config " + path.string() + ": " + e.what());
    }
    FilterConfig c;
    try {
        c.duration_enabled = j.value("duration_enabled", c.duration_enabled);
        c.duration = j.value("duration", c.duration);
        c.severity_enabled = j.value("severity_enabled", c.severity_enabled);
        c.severity = j.value("severity", c.severity);
        c.concurrency_enabled = j.value("concurrency_enabled", c.concurrency_enabled);
        c.concurrency = j.value("concurrency", c.concurrency);
        c.mtr_enabled = j.value("mtr_enabled", c.mtr_enabled);
        c.mtr = j.value("mtr", c.mtr);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("filter config " + path.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

ModelDayContext ModelDayContext::from(std::span<const DecisionRecord> decisions, std::span<const DailyStatRow> stats) {
    ModelDayContext ctx;
    for (const auto& d : decisions) {
        auto& [abnormal, total] = ctx.counts_[{d.key.model_id, d.date}];
        ++total;
        if (d.is_anomaly) ++abnormal;
    }
    for (const auto& row : stats) {
        if (row.statistic.kind() == StatisticKind::Kind::traffic_ratio) ctx.ratios_[{row.model_id, row.date}] = row.value;
    }
    return ctx;
}

std::optional<double> ModelDayContext::traffic_ratio(const std::string& model, Day day) const {
    auto it = ratios_.find({model, day});
    return it == ratios_.end() ? std::nullopt : it->second;
}

std::pair<std::size_t, std::size_t> ModelDayContext::counts(const std::string& model, Day day) const {
    auto it = counts_.find({model, day});
    return it == counts_.end() ? std::pair<std::size_t, std::size_t>{0, 0} : it->second;
}

double ModelDayContext::max_concurrency(const std::string& model, Day from, Day to) const {
    double best = 0.0;
    bool seen = false;
    for (Day d = from; d <= to; d += std::chrono::days{1}) {
        const auto [abnormal, total] = counts(model, d);
        if (total == 0) continue;
        seen = true;
        best = std::max(best, static_cast<double>(abnormal) / static_cast<double>(total));
    }
    return seen ? best : 1.0;
}

std::vector<AnomalyInterval> apply_filters(std::vector<AnomalyInterval> intervals, const FilterConfig& config,
                                           const ModelDayContext& context) {
    config.validate();
    for (auto& in : intervals) {
        in.trace = {};
        if (config.duration_enabled) in.trace.duration = duration_filter(in, config.duration);
        if (config.severity_enabled) in.trace.severity = severity_filter(in, config.severity);
        if (config.concurrency_enabled) {
            in.trace.concurrency = context.max_concurrency(in.key.model_id, in.start, in.end) >= config.concurrency;
        }
        if (config.mtr_enabled) in.trace.mtr = mtr_filter(context.traffic_ratio(in.key.model_id, in.end), config.mtr);
    }
    return intervals;
}

std::string_view to_string(GroupingRule rule) {
    return rule == GroupingRule::any_entity ? "or" : "subset-or";
}

std::vector<ModelAlert> group_to_model(std::span<const AnomalyInterval> intervals, GroupingRule rule,
                                       const std::set<std::string>& entity_subset, const ModelDayContext* context) {
    std::map<std::string, std::vector<AnomalyInterval>> per_model;
    for (const auto& in : intervals) {
        if (rule == GroupingRule::entity_subset && !entity_subset.contains(in.key.entity)) continue;
        per_model[in.key.model_id].push_back(in);
    }
    std::vector<ModelAlert> alerts;
    for (auto& [model, list] : per_model) {
        std::ranges::sort(list, [](const AnomalyInterval& a, const AnomalyInterval& b) {
            return std::tie(a.start, a.end, a.key) < std::tie(b.start, b.end, b.key);
        });
        for (auto& in : list) {
            if (!alerts.empty() && alerts.back().model_id == model && in.start <= alerts.back().end) {
                alerts.back().end = std::max(alerts.back().end, in.end);
                alerts.back().intervals.push_back(std::move(in));
            } else {
                ModelAlert a;
                a.model_id = model;
                a.start = in.start;
                a.end = in.end;
                a.rule = rule;
                a.intervals.push_back(std::move(in));
                alerts.push_back(std::move(a));
            }
        }
    }
    if (context != nullptr) {
        for (auto& a : alerts) a.traffic_ratio = context->traffic_ratio(a.model_id, a.end);
    }
    return alerts;
}

PostprocessResult postprocess(std::span<const DecisionRecord> decisions, const FilterConfig& config,
                              const ModelDayContext& context, GroupingRule rule,
                              const std::set<std::string>& entity_subset) {
    std::map<SeriesKey, std::vector<DecisionRecord>> per_series;
    for (const auto& d : decisions) per_series[d.key].push_back(d);
    PostprocessResult result;
    for (const auto& [key, list] : per_series) {
        auto merged = merge_points_to_intervals(list);
        std::ranges::move(merged, std::back_inserter(result.intervals));
    }
    result.intervals = apply_filters(std::move(result.intervals), config, context);
    std::vector<AnomalyInterval> kept;
    for (const auto& in : result.intervals)
        if (in.trace.passed()) kept.push_back(in);
    result.alerts = group_to_model(kept, rule, entity_subset, &context);
    return result;
}

} // namespace healthwatch
