#include "healthwatch/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "healthwatch/error.hpp"
#include "healthwatch/model_io.hpp"
#include "parallel.hpp"

namespace healthwatch::eval {

namespace {

bool overlaps(const LabelInterval& a, const LabelInterval& b) { return a.start <= b.end && b.start <= a.end; }

std::vector<DecisionRecord> detect_series(const LabeledSeries& record, const Detector& detector,
                                          const DetectOptions& options) {
    std::vector<DecisionRecord> out;
    const auto& s = record.series;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Day day = s.day_at(i);
        const auto window = build_window(s, day);
        if (!window.valid()) continue;
        if (auto d = detector.detect(window, options))
            out.push_back(DecisionRecord::from_point(s.key, day, window.horizon(), *d));
    }
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

std::vector<LabelInterval> chop_intervals(std::span<const LabelInterval> intervals, int max_days) {
    if (max_days < 1) throw UsageError("chop length must be positive");
    std::vector<LabelInterval> out;
    const std::chrono::days step{max_days};
    for (const auto& in : intervals) {
        for (Day s = in.start; s <= in.end; s += step) {
            const Day e = std::min(in.end, s + step - std::chrono::days{1});
            out.push_back({s, e});
        }
    }
    return out;
}

MatchCounts& MatchCounts::operator+=(const MatchCounts& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    matches.insert(matches.end(), other.matches.begin(), other.matches.end());
    return *this;
}

MatchCounts match_intervals(std::span<const LabelInterval> predicted, std::span<const LabelInterval> labeled) {
    MatchCounts c;
    for (const auto& l : labeled) {
        const bool hit = std::ranges::any_of(predicted, [&](const LabelInterval& p) { return overlaps(p, l); });
        (hit ? c.tp : c.fn) += 1;
    }
    for (const auto& p : predicted) {
        const auto it = std::ranges::find_if(labeled, [&](const LabelInterval& l) { return overlaps(p, l); });
        IntervalMatch m{p, std::nullopt};
        if (it != labeled.end()) m.label = *it;
        else ++c.fp;
        c.matches.push_back(m);
    }
    return c;
}

Metrics compute_prf(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    if (tp < 0 || fp < 0 || fn < 0) throw UsageError("match counts must be non-negative");
    Metrics m;
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

nlohmann::json to_json(const EvalResult& r) {
    return {{"fingerprint", r.fingerprint},
            {"tp", r.tp},
            {"fp", r.fp},
            {"fn", r.fn},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"wall_time_s", r.wall_time_seconds},
            {"series", r.series},
            {"decisions", r.decisions},
            {"predicted_intervals", r.predicted_intervals},
            {"labeled_intervals", r.labeled_intervals}};
}

std::vector<DecisionRecord> rolling_detect(std::span<const LabeledSeries> dataset, const Detector& detector,
                                           const DetectOptions& options, int workers) {
    std::vector<std::vector<DecisionRecord>> per_series(dataset.size());
    const auto n = static_cast<std::ptrdiff_t>(dataset.size());
#pragma omp parallel for schedule(dynamic, 4) num_threads(detail::resolve_workers(workers))
    for (std::ptrdiff_t i = 0; i < n; ++i) per_series[i] = detect_series(dataset[i], detector, options);
    std::vector<DecisionRecord> out;
    for (auto& v : per_series) std::ranges::move(v, std::back_inserter(out));
    return out;
}

std::vector<DecisionRecord> rolling_detect_serial(std::span<const LabeledSeries> dataset, const Detector& detector,
                                                  const DetectOptions& options) {
    std::vector<DecisionRecord> out;
    for (const auto& r : dataset) {
        auto v = detect_series(r, detector, options);
        std::ranges::move(v, std::back_inserter(out));
    }
    return out;
}

std::vector<DetectionWindow> rolling_windows(std::span<const LabeledSeries> dataset) {
    std::vector<DetectionWindow> out;
    for (const auto& r : dataset) {
        for (std::size_t i = 0; i < r.series.size(); ++i) {
            auto w = build_window(r.series, r.series.day_at(i));
            if (w.valid()) out.push_back(std::move(w));
        }
    }
    return out;
}

std::vector<AnomalyInterval> predicted_intervals(std::span<const DecisionRecord> decisions, const FilterConfig& filters,
                                                 std::span<const DailyStatRow> stats) {
    const auto context = ModelDayContext::from(decisions, stats);
    auto result = postprocess(decisions, filters, context);
    std::vector<AnomalyInterval> kept;
    for (auto& in : result.intervals)
        if (in.trace.passed()) kept.push_back(std::move(in));
    return kept;
}

MatchCounts score_intervals(std::span<const LabeledSeries> dataset, std::span<const AnomalyInterval> predicted) {
    std::map<SeriesKey, std::pair<std::vector<LabelInterval>, std::vector<LabelInterval>>> sides;
    for (const auto& r : dataset) {
        auto& labels = sides[r.series.key].second;
        labels.insert(labels.end(), r.labels.begin(), r.labels.end());
    }
    for (const auto& p : predicted) sides[p.key].first.push_back({p.start, p.end});
    MatchCounts total;
    for (const auto& [key, pl] : sides) {
        const auto pred = chop_intervals(pl.first);
        const auto labels = chop_intervals(pl.second);
        total += match_intervals(pred, labels);
    }
    return total;
}

namespace {

EvalResult finish(std::span<const LabeledSeries> dataset, std::span<const DecisionRecord> decisions,
                  std::span<const AnomalyInterval> predicted, const MatchCounts& counts) {
    EvalResult r;
    r.tp = counts.tp;
    r.fp = counts.fp;
    r.fn = counts.fn;
    const auto m = compute_prf(r.tp, r.fp, r.fn);
    r.precision = m.precision;
    r.recall = m.recall;
    r.f1 = m.f1;
    r.series = dataset.size();
    r.decisions = decisions.size();
    r.predicted_intervals = predicted.size();
    r.labeled_intervals = static_cast<std::size_t>(counts.tp + counts.fn);
    return r;
}

void hash_bytes(std::uint64_t& h, std::string_view bytes) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
}

std::string filters_text(const FilterConfig& f) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "d%d:%d s%d:%.17g c%d:%.17g m%d:%.17g", f.duration_enabled, f.duration,
                  f.severity_enabled, f.severity, f.concurrency_enabled, f.concurrency, f.mtr_enabled, f.mtr);
    return buf;
}

} // namespace

EvalResult score_decisions(std::span<const LabeledSeries> dataset, std::span<const DecisionRecord> decisions,
                           const FilterConfig& filters) {
    const auto predicted = predicted_intervals(decisions, filters);
    auto r = finish(dataset, decisions, predicted, score_intervals(dataset, predicted));
    std::uint64_t h = 0xcbf29ce484222325ULL;
    hash_bytes(h, "external ");
    hash_bytes(h, filters_text(filters));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    r.fingerprint = buf;
    return r;
}

std::string fingerprint(const Detector& detector, const EvalOptions& options) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto models = detector.models();
    hash_bytes(h, serialize_models(models));
    hash_bytes(h, filters_text(options.effective_filters()));
    char buf[64];
    std::snprintf(buf, sizeof buf, " cls%d th%.17g", options.use_classifier, options.threshold.value_or(-1.0));
    hash_bytes(h, buf);
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

EvalResult evaluate(std::span<const LabeledSeries> dataset, const Detector& detector, const EvalOptions& options) {
    const DetectOptions detect_options{options.use_classifier, options.threshold};
    const auto filters = options.effective_filters();
    const auto t0 = std::chrono::steady_clock::now();
    const auto decisions = rolling_detect(dataset, detector, detect_options, options.workers);
    const auto predicted = predicted_intervals(decisions, filters);
    const double elapsed = seconds_since(t0);
    auto r = finish(dataset, decisions, predicted, score_intervals(dataset, predicted));
    r.wall_time_seconds = elapsed;
    r.fingerprint = fingerprint(detector, options);
    return r;
}

double tune_threshold(const Detector& detector, std::span<const LabeledSeries> validation, std::span<const double> grid,
                      const FilterConfig& filters, int workers) {
    if (grid.empty()) throw UsageError("threshold grid is empty");
    std::size_t positives = 0;
    for (const auto& r : validation) positives += r.labels.size();
    if (positives == 0) throw UsageError("validation set has no labeled anomaly interval");
    for (double theta : grid)
        if (!(theta > 0.0 && theta < 1.0)) throw UsageError("threshold grid values must lie in (0, 1)");

    std::vector<double> sorted(grid.begin(), grid.end());
    std::ranges::sort(sorted);
    auto decisions = rolling_detect(validation, detector, {}, workers);
    double best_theta = sorted.front();
    double best_f1 = -1.0;
    for (double theta : sorted) {
        for (auto& d : decisions) d.is_anomaly = d.out_of_boundary && d.anomaly_probability >= theta;
        const double f1 = score_decisions(validation, decisions, filters).f1;
        if (f1 > best_f1) {
            best_f1 = f1;
            best_theta = theta;
        }
    }
    return best_theta;
}

std::vector<TimingSample> timing_harness(const Detector& detector, std::span<const DetectionWindow> windows,
                                         std::span<const int> worker_counts, int repeats,
                                         const DetectOptions& options) {
    std::vector<TimingSample> out;
    for (int w : worker_counts) {
        TimingSample s;
        s.workers = w;
        s.windows = windows.size();
        s.seconds = std::numeric_limits<double>::infinity();
        for (int k = 0; k < std::max(1, repeats); ++k) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto decisions = detect_windows(windows, detector, options, w);
            s.seconds = std::min(s.seconds, seconds_since(t0));
            s.decisions = static_cast<std::size_t>(std::ranges::count_if(decisions, [](const auto& d) { return d.has_value(); }));
        }
        out.push_back(s);
    }
    return out;
}

void write_results(const std::filesystem::path& path, std::span<const EvalResult> results) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& r : results) out << to_json(r).dump() << '\n';
}

} // namespace healthwatch::eval
