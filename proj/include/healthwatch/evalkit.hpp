#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "healthwatch/detector.hpp"
#include "healthwatch/postprocess.hpp"
#include "healthwatch/series.hpp"

namespace healthwatch::eval {

inline constexpr int kMaxIntervalDays = 7;

/// Greedy left-to-right chop into pieces of at most `max_days` days.
std::vector<LabelInterval> chop_intervals(std::span<const LabelInterval> intervals, int max_days = kMaxIntervalDays);

struct IntervalMatch {
    LabelInterval predicted;
    std::optional<LabelInterval> label;  ///< first overlapping label, if any
};

struct MatchCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::vector<IntervalMatch> matches;

    MatchCounts& operator+=(const MatchCounts& other);
};

/// Both sides pre-chopped. A label overlapping any prediction is one TP, otherwise one FN;
/// a prediction overlapping no label is one FP. A prediction spanning two labels credits both.
MatchCounts match_intervals(std::span<const LabelInterval> predicted, std::span<const LabelInterval> labeled);

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Zero-denominator ratios are 0.
Metrics compute_prf(std::int64_t tp, std::int64_t fp, std::int64_t fn);

struct EvalResult {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double wall_time_seconds = 0.0;
    std::string fingerprint;
    std::size_t series = 0;
    std::size_t decisions = 0;
    std::size_t predicted_intervals = 0;
    std::size_t labeled_intervals = 0;
};

nlohmann::json to_json(const EvalResult& result);

/// Decisions for every day of every series whose rolling window is valid and has a model.
/// Output is ordered by dataset order then date, independent of `workers`.
std::vector<DecisionRecord> rolling_detect(std::span<const LabeledSeries> dataset, const Detector& detector,
                                           const DetectOptions& options = {}, int workers = 0);

/// Single-threaded reference for rolling_detect.
std::vector<DecisionRecord> rolling_detect_serial(std::span<const LabeledSeries> dataset, const Detector& detector,
                                                  const DetectOptions& options = {});

/// Every valid rolling window across the dataset (prepared input for timing and batch detection).
std::vector<DetectionWindow> rolling_windows(std::span<const LabeledSeries> dataset);

struct EvalOptions {
    bool filters = true;
    FilterConfig filter_config;  ///< used when `filters` is on
    bool use_classifier = true;
    std::optional<double> threshold;
    int workers = 0;

    FilterConfig effective_filters() const { return filters ? filter_config : FilterConfig::all_disabled(); }
};

/// Predicted intervals per series after merging and filtering `decisions`.
std::vector<AnomalyInterval> predicted_intervals(std::span<const DecisionRecord> decisions, const FilterConfig& filters,
                                                 std::span<const DailyStatRow> stats = {});

/// Interval-wise counts of predicted intervals against the dataset labels, both sides chopped.
MatchCounts score_intervals(std::span<const LabeledSeries> dataset, std::span<const AnomalyInterval> predicted);

/// External-decisions mode: scores any detector's decisions file against the labels.
EvalResult score_decisions(std::span<const LabeledSeries> dataset, std::span<const DecisionRecord> decisions,
                           const FilterConfig& filters);

/// Rolling detection, post-processing and scoring. Wall time covers detection and
/// post-processing, not file parsing.
EvalResult evaluate(std::span<const LabeledSeries> dataset, const Detector& detector, const EvalOptions& options);

/// FNV-1a hash over the detector weights and the evaluation options.
std::string fingerprint(const Detector& detector, const EvalOptions& options);

/// Grid value with the best interval-wise F1 on the validation set; ties go to the smaller value.
/// Throws UsageError when the grid is empty or the validation set has no labeled interval.
double tune_threshold(const Detector& detector, std::span<const LabeledSeries> validation, std::span<const double> grid,
                      const FilterConfig& filters = FilterConfig::all_disabled(), int workers = 0);

struct TimingSample {
    int workers = 0;
    double seconds = 0.0;
    std::size_t windows = 0;
    std::size_t decisions = 0;
};

/// Best-of-`repeats` wall time of batch detection over prepared windows for each worker count.
std::vector<TimingSample> timing_harness(const Detector& detector, std::span<const DetectionWindow> windows,
                                         std::span<const int> worker_counts, int repeats = 1,
                                         const DetectOptions& options = {});

/// One JSON line per result; replaces an existing file.
void write_results(const std::filesystem::path& path, std::span<const EvalResult> results);

} // namespace healthwatch::eval
