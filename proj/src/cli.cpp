#include "healthwatch/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "healthwatch/error.hpp"
#include "healthwatch/evalkit.hpp"
#include "healthwatch/health_stats.hpp"
#include "healthwatch/io.hpp"
#include "healthwatch/model_io.hpp"
#include "healthwatch/postprocess.hpp"
#include "healthwatch/report.hpp"
#include "healthwatch/synth.hpp"
#include "healthwatch/training.hpp"

namespace healthwatch::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kFormats = R"(File formats (all outputs are overwritten on re-run):
  events      JSON lines: {"model_id": str, "product_id": str, "timestamp": int ms,
              "features": {name: number | string | [number...] | null}, "score": number}
  stats       CSV with header model_id,entity,statistic,date,value; empty value = missing.
              Score statistics use entity __score__, traffic and traffic_ratio use __model__.
  dataset     JSON lines: {"model_id", "entity", "statistic", "start_date": "YYYY-MM-DD",
              "values": [number | null...], "anomalies": [{"start": date, "end": date}...]}
  model       binary weight file (magic HWFM, version 1, one model per horizon, CRC-32).
  decisions   JSON lines; "record": "decision" rows carry key, date, horizon, observed,
              baseline, lower, upper, p_anomaly, severity, out_of_boundary, is_anomaly;
              "record": "interval" rows carry start, end, duration, max_severity, pattern,
              severities and the per-filter outcome.
  alerts      JSON lines, one model-level alert with its intervals per line.
  filters     JSON object with any of duration_enabled, duration, severity_enabled, severity,
              concurrency_enabled, concurrency, mtr_enabled, mtr.
  grid        JSON object with shapes, noise_std, intensity, duration (arrays), pattern,
              length, period, amplitude, base_level.
  importance  JSON object {model_id: {entity: score}}.
  results     JSON lines, one evaluation run per line.
Exit codes: 0 ok, 1 internal error, 2 usage error, 3 data error, 4 no alerts to report.
Log level: HEALTHWATCH_LOG_LEVEL=trace|debug|info|warn|error|off (default info).)";

std::shared_ptr<spdlog::logger> make_logger() {
    auto logger = spdlog::stderr_color_st("healthwatch");
    logger->set_pattern("[%l] %v");
    logger->set_level(spdlog::level::info);
    if (const char* env = std::getenv("HEALTHWATCH_LOG_LEVEL"); env != nullptr && *env != '\0') {
        const auto level = spdlog::level::from_str(env);
        if (level == spdlog::level::off && std::string_view(env) != "off")
            throw UsageError(std::string("unknown log level '") + env + "'");
        logger->set_level(level);
    }
    return logger;
}

bool on_off(const std::string& value, const char* flag) {
    if (value == "on") return true;
    if (value == "off") return false;
    throw UsageError(std::string(flag) + " must be on or off");
}

void require_file(const fs::path& path, const char* what) {
    if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path.string());
}

std::vector<LabeledSeries> series_from_stats(const std::vector<DailyStatRow>& rows) {
    std::vector<DailyStatRow> monitored;
    for (const auto& r : rows)
        if (r.entity != kModelEntity) monitored.push_back(r);
    std::vector<LabeledSeries> out;
    for (auto& s : build_series(monitored)) out.push_back({std::move(s), {}});
    return out;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Aggregate {
    std::string events, out;
    double default_value = 0.0;
    bool strict = false;
    int workers = 0;
};

int do_aggregate(const Aggregate& o, spdlog::logger& log) {
    require_file(o.events, "events file");
    const auto parsed = parse_events(fs::path(o.events), o.strict);
    if (parsed.rejects > 0) log.warn("skipped {} malformed event lines", parsed.rejects);
    AggregationConfig config;
    config.default_value = o.default_value;
    config.workers = o.workers;
    auto rows = aggregate_daily(parsed.events, config);
    std::vector<DailyStatRow> traffic;
    for (const auto& r : rows)
        if (r.statistic.kind() == StatisticKind::Kind::traffic) traffic.push_back(r);
    const auto ratios = compute_traffic_ratio(traffic, model_products(parsed.events));
    rows.insert(rows.end(), ratios.begin(), ratios.end());
    io::write_stats(fs::path(o.out), rows);
    log.info("aggregated {} events into {} rows -> {}", parsed.events.size(), rows.size(), o.out);
    return kOk;
}

struct Train {
    std::string data, out, horizon = "both";
    std::uint64_t seed = 0;
    TrainConfig config;
};

int do_train(Train o, spdlog::logger& log) {
    require_file(o.data, "dataset");
    o.config.seed = o.seed;
    o.config.validate();
    std::vector<int> horizons;
    if (o.horizon == "14") horizons = {kShortHorizon};
    else if (o.horizon == "28") horizons = {kLongHorizon};
    else if (o.horizon == "both") horizons = {kShortHorizon, kLongHorizon};
    else throw UsageError("--horizon must be 14, 28 or both");
    const auto dataset = io::read_dataset(fs::path(o.data));
    std::vector<ForecastModel> models;
    for (int h : horizons) {
        const auto set = collect_training_windows(dataset, h);
        log.info("training H={} on {} windows", h, set.size());
        TrainReport report;
        models.push_back(train(set, h, o.config, &report));
        if (!report.forecast_loss.empty())
            log.info("H={} final forecast loss {:.6g}, classifier loss {:.6g}", h, report.forecast_loss.back(),
                     report.classifier_loss.empty() ? 0.0 : report.classifier_loss.back());
    }
    save_models(fs::path(o.out), models);
    log.info("wrote {} model(s) -> {}", models.size(), o.out);
    return kOk;
}

struct Detect {
    std::string model, stats, data, out, classifier = "on";
    std::optional<double> threshold;
    int workers = 0;
};

int do_detect(const Detect& o, spdlog::logger& log) {
    require_file(o.model, "model file");
    if (o.stats.empty() == o.data.empty()) throw UsageError("detect needs exactly one of --stats or --data");
    const Detector detector(load_models(fs::path(o.model)));
    std::vector<LabeledSeries> series;
    if (!o.stats.empty()) {
        require_file(o.stats, "stats file");
        series = series_from_stats(io::read_stats(fs::path(o.stats)));
    } else {
        require_file(o.data, "dataset");
        series = io::read_dataset(fs::path(o.data));
    }
    const DetectOptions options{on_off(o.classifier, "--classifier"), o.threshold};
    const auto decisions = eval::rolling_detect(series, detector, options, o.workers);
    io::write_decisions(fs::path(o.out), decisions);
    const auto flagged = std::ranges::count_if(decisions, [](const DecisionRecord& d) { return d.is_anomaly; });
    log.info("{} series, {} decisions, {} anomalous -> {}", series.size(), decisions.size(), flagged, o.out);
    return kOk;
}

struct Postprocess {
    std::string decisions, stats, config, out, alerts, rule = "or", entities;
    std::optional<int> duration;
    std::optional<double> severity;
    std::string concurrency, mtr;
    bool no_filters = false;
};

std::optional<double> threshold_flag(const std::string& text, const char* flag) {
    if (text == "off") return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw UsageError(std::string(flag) + " must be a number or off");
    }
}

int do_postprocess(const Postprocess& o, spdlog::logger& log) {
    require_file(o.decisions, "decisions file");
    FilterConfig filters;
    if (!o.config.empty()) {
        require_file(o.config, "filter config");
        filters = FilterConfig::load(fs::path(o.config));
    }
    if (o.duration) {
        filters.duration_enabled = true;
        filters.duration = *o.duration;
    }
    if (o.severity) {
        filters.severity_enabled = true;
        filters.severity = *o.severity;
    }
    if (!o.concurrency.empty()) {
        const auto v = threshold_flag(o.concurrency, "--concurrency");
        filters.concurrency_enabled = v.has_value();
        if (v) filters.concurrency = *v;
    }
    if (!o.mtr.empty()) {
        const auto v = threshold_flag(o.mtr, "--mtr");
        filters.mtr_enabled = v.has_value();
        if (v) filters.mtr = *v;
    }
    if (o.no_filters) filters = FilterConfig::all_disabled();
    filters.validate();

    GroupingRule rule = GroupingRule::any_entity;
    std::set<std::string> subset;
    if (o.rule == "subset-or") {
        rule = GroupingRule::entity_subset;
        std::stringstream ss(o.entities);
        for (std::string e; std::getline(ss, e, ',');)
            if (!e.empty()) subset.insert(e);
        if (subset.empty()) throw UsageError("--rule subset-or needs --entities");
    } else if (o.rule != "or") {
        throw UsageError("--rule must be or or subset-or");
    }

    const auto decisions = io::read_decisions(fs::path(o.decisions));
    std::vector<DailyStatRow> stats;
    if (!o.stats.empty()) {
        require_file(o.stats, "stats file");
        stats = io::read_stats(fs::path(o.stats));
    }
    const auto context = ModelDayContext::from(decisions, stats);
    const auto result = postprocess(decisions, filters, context, rule, subset);
    io::write_decisions(fs::path(o.out), decisions, result.intervals);
    const auto kept = std::ranges::count_if(result.intervals, [](const AnomalyInterval& in) { return in.trace.passed(); });
    if (!o.alerts.empty()) io::write_alerts(fs::path(o.alerts), result.alerts);
    log.info("{} intervals, {} kept, {} model alerts -> {}", result.intervals.size(), kept, result.alerts.size(), o.out);
    return kOk;
}

struct Synth {
    std::string grid, out;
    std::size_t n = 10;
    std::uint64_t seed = 0;
};

int do_synth(const Synth& o, spdlog::logger& log) {
    synth::Grid grid;
    if (!o.grid.empty()) {
        require_file(o.grid, "grid file");
        grid = synth::Grid::load(fs::path(o.grid));
    }
    if (o.n == 0) throw UsageError("--n must be positive");
    const auto dataset = synth::generate_dataset(grid, o.n, o.seed);
    synth::write_output(fs::path(o.out), dataset);
    std::vector<LabeledSeries> records;
    for (const auto& s : dataset) records.push_back(s.record);
    log.info("{} series ({:.2f}% abnormal days) -> {}", dataset.size(), synth::abnormal_day_percent(records), o.out);
    return kOk;
}

struct Eval {
    std::string data, model, decisions, filters = "on", filter_config, classifier = "on", out, timing;
    std::optional<double> threshold;
    int workers = 0;
};

int do_eval(const Eval& o, spdlog::logger& log) {
    require_file(o.data, "dataset");
    if (o.model.empty() == o.decisions.empty()) throw UsageError("eval needs exactly one of --model or --decisions");
    eval::EvalOptions options;
    options.filters = on_off(o.filters, "--filters");
    options.use_classifier = on_off(o.classifier, "--classifier");
    options.threshold = o.threshold;
    options.workers = o.workers;
    if (!o.filter_config.empty()) {
        require_file(o.filter_config, "filter config");
        options.filter_config = FilterConfig::load(fs::path(o.filter_config));
    }
    const auto dataset = io::read_dataset(fs::path(o.data));
    eval::EvalResult result;
    if (!o.decisions.empty()) {
        require_file(o.decisions, "decisions file");
        const auto decisions = io::read_decisions(fs::path(o.decisions));
        result = eval::score_decisions(dataset, decisions, options.effective_filters());
    } else {
        require_file(o.model, "model file");
        const Detector detector(load_models(fs::path(o.model)));
        result = eval::evaluate(dataset, detector, options);
        if (!o.timing.empty()) {
            std::vector<int> counts;
            std::stringstream ss(o.timing);
            for (std::string t; std::getline(ss, t, ',');) counts.push_back(std::stoi(t));
            const auto windows = eval::rolling_windows(dataset);
            for (const auto& s : eval::timing_harness(detector, windows, counts, 3))
                log.info("workers={} windows={} seconds={:.4f}", s.workers, s.windows, s.seconds);
        }
    }
    const std::vector<eval::EvalResult> results{result};
    eval::write_results(fs::path(o.out), results);
    std::cout << eval::to_json(result).dump() << '\n';
    log.info("tp={} fp={} fn={} precision={:.4f} recall={:.4f} f1={:.4f}", result.tp, result.fp, result.fn,
             result.precision, result.recall, result.f1);
    return kOk;
}

struct Report {
    std::string alerts, stats, decisions, importance, out, generated_at;
};

int do_report(const Report& o, spdlog::logger& log) {
    require_file(o.alerts, "alerts file");
    const auto alerts = io::read_alerts(fs::path(o.alerts));
    if (alerts.empty()) {
        log.info("no alerts; no report written");
        return kNothingToReport;
    }
    std::vector<DailyStatRow> stats;
    if (!o.stats.empty()) {
        require_file(o.stats, "stats file");
        stats = io::read_stats(fs::path(o.stats));
    }
    std::vector<DecisionRecord> decisions;
    if (!o.decisions.empty()) {
        require_file(o.decisions, "decisions file");
        decisions = io::read_decisions(fs::path(o.decisions));
    }
    report::ImportanceConfig importance;
    if (!o.importance.empty()) {
        require_file(o.importance, "importance config");
        importance = report::ImportanceConfig::load(fs::path(o.importance));
    }
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw DataError("cannot create " + o.out + ": " + ec.message());
    const std::string stamp = o.generated_at.empty() ? utc_now() : o.generated_at;
    std::vector<std::string> errors(alerts.size());
    const auto n = static_cast<std::ptrdiff_t>(alerts.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto bundle = report::build_bundle(alerts[i], stats, decisions, importance, stamp);
            report::write_report(bundle, fs::path(o.out) / report::report_file_name(alerts[i]));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw DataError(e);
    log.info("{} report(s) -> {}", alerts.size(), o.out);
    return kOk;
}

struct Gradcheck {
    std::uint64_t seed = 0;
    int horizon = kLongHorizon;
    std::size_t windows = 8;
};

int do_gradcheck(const Gradcheck& o, spdlog::logger& log) {
    if (o.horizon != kShortHorizon && o.horizon != kLongHorizon) throw UsageError("--horizon must be 14 or 28");
    if (o.windows == 0) throw UsageError("--windows must be positive");
    synth::SynthConfig sc;
    sc.seed = o.seed;
    sc.anomaly.pattern = synth::InjectPattern::level_shift;
    sc.anomaly.duration = 6;
    const auto series = synth::generate_series(sc, 0);
    const std::vector<LabeledSeries> data{series.record};
    const auto set = collect_training_windows(data, o.horizon);
    std::mt19937_64 rng(o.seed);
    std::vector<std::size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    // Keep one anomalous window so the classifier sees both labels.
    std::ranges::stable_partition(idx, [&](std::size_t i) { return set.anomalous[i]; });
    std::vector<DetectionWindow> windows;
    std::vector<bool> labels;
    for (std::size_t k = 0; k < idx.size() && windows.size() < o.windows; ++k) {
        if (set.anomalous[idx[k]] && std::ranges::count(labels, true) >= 1) continue;
        windows.push_back(set.windows[idx[k]]);
        labels.push_back(set.anomalous[idx[k]]);
    }
    TrainConfig tc;
    const auto model = ForecastModel::initialize(tc.hyperparams(o.horizon), o.seed);
    const auto r = gradient_check(model, windows, labels);
    std::cout << "max relative gradient error: " << r.max_rel_error() << " (forecast " << r.forecast_max_rel_error
              << ", classifier " << r.classifier_max_rel_error << ", " << r.parameters_checked << " parameters)\n";
    log.debug("gradcheck seed={} horizon={} windows={}", o.seed, o.horizon, windows.size());
    return kOk;
}

} // namespace

int run(int argc, const char* const* argv) {
    std::shared_ptr<spdlog::logger> log;
    try {
        spdlog::drop("healthwatch");
        log = make_logger();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    }

    CLI::App app{"Model-health monitoring: statistics, anomaly detection, filtering, evaluation and reports",
                 "healthwatch"};
    app.footer(kFormats);
    app.require_subcommand(1);

    Aggregate agg;
    auto* s_agg = app.add_subcommand("aggregate", "Daily health statistics from a scoring-event log");
    s_agg->add_option("--events", agg.events, "Event log (JSON lines)")->required();
    s_agg->add_option("--out", agg.out, "Output stats CSV")->required();
    s_agg->add_option("--default-value", agg.default_value, "Default value for non-default coverage");
    s_agg->add_flag("--strict", agg.strict, "Abort on the first malformed event line");
    s_agg->add_option("--workers", agg.workers, "OpenMP workers (0 = all cores)");

    Train tr;
    auto* s_train = app.add_subcommand("train", "Train forecaster and classifier on a labeled dataset");
    s_train->add_option("--data", tr.data, "Labeled dataset (JSON lines)")->required();
    s_train->add_option("--out", tr.out, "Output model file")->required();
    s_train->add_option("--horizon", tr.horizon, "14, 28 or both");
    s_train->add_option("--seed", tr.seed, "Seed for initialization and shuffling");
    s_train->add_option("--epochs", tr.config.epochs, "Epochs per phase");
    s_train->add_option("--batch-size", tr.config.batch_size, "Mini-batch size");
    s_train->add_option("--learning-rate", tr.config.learning_rate, "Adam learning rate");
    s_train->add_option("--quantile-weight", tr.config.quantile_weight, "Weight of the quantile losses");
    s_train->add_option("--threshold", tr.config.anomaly_threshold, "Anomaly probability threshold stored in the model");

    Detect det;
    auto* s_det = app.add_subcommand("detect", "Rolling-window detection over stats or a dataset");
    s_det->add_option("--model", det.model, "Model file")->required();
    s_det->add_option("--stats", det.stats, "Stats CSV (model-level __model__ rows are not monitored)");
    s_det->add_option("--data", det.data, "Labeled dataset");
    s_det->add_option("--out", det.out, "Output decisions file")->required();
    s_det->add_option("--classifier", det.classifier, "on: boundary and probability; off: boundary only");
    s_det->add_option("--threshold", det.threshold, "Override the model's anomaly threshold");
    s_det->add_option("--workers", det.workers, "OpenMP workers (0 = all cores)");

    Postprocess pp;
    auto* s_pp = app.add_subcommand("postprocess", "Merge decisions into intervals, filter and group to alerts");
    s_pp->add_option("--decisions", pp.decisions, "Decisions file")->required();
    s_pp->add_option("--stats", pp.stats, "Stats CSV providing traffic ratios");
    s_pp->add_option("--config", pp.config, "Filter config (JSON)");
    s_pp->add_option("--duration", pp.duration, "Minimum interval duration in days");
    s_pp->add_option("--severity", pp.severity, "Minimum interval max severity");
    s_pp->add_option("--concurrency", pp.concurrency, "Minimum abnormal fraction of the model's series, or off");
    s_pp->add_option("--mtr", pp.mtr, "Minimum model traffic ratio, or off");
    s_pp->add_flag("--no-filters", pp.no_filters, "Disable every filter");
    s_pp->add_option("--rule", pp.rule, "Grouping rule: or | subset-or");
    s_pp->add_option("--entities", pp.entities, "Comma-separated entities for subset-or");
    s_pp->add_option("--out", pp.out, "Output decisions file with interval records")->required();
    s_pp->add_option("--alerts", pp.alerts, "Output alerts file");

    Synth sy;
    auto* s_syn = app.add_subcommand("synth", "Generate the synthetic labeled benchmark");
    s_syn->add_option("--grid", sy.grid, "Grid config (JSON); defaults to one cell per shape");
    s_syn->add_option("--n", sy.n, "Series per grid cell");
    s_syn->add_option("--seed", sy.seed, "Seed");
    s_syn->add_option("--out", sy.out, "Output directory (dataset.jsonl, manifest.jsonl)")->required();

    Eval ev;
    auto* s_eval = app.add_subcommand("eval", "Interval-wise precision/recall/F1 of a model or a decisions file");
    s_eval->add_option("--data", ev.data, "Labeled dataset")->required();
    s_eval->add_option("--model", ev.model, "Model file");
    s_eval->add_option("--decisions", ev.decisions, "Decisions file from any detector");
    s_eval->add_option("--filters", ev.filters, "on | off");
    s_eval->add_option("--filter-config", ev.filter_config, "Filter config used when filters are on");
    s_eval->add_option("--classifier", ev.classifier, "on | off");
    s_eval->add_option("--threshold", ev.threshold, "Override the anomaly threshold");
    s_eval->add_option("--workers", ev.workers, "OpenMP workers (0 = all cores)");
    s_eval->add_option("--timing", ev.timing, "Comma-separated worker counts to time batch detection with");
    s_eval->add_option("--out", ev.out, "Results file")->required();

    Report rp;
    auto* s_rep = app.add_subcommand("report", "Render one HTML report per model alert");
    s_rep->add_option("--alerts", rp.alerts, "Alerts file")->required();
    s_rep->add_option("--stats", rp.stats, "Stats CSV");
    s_rep->add_option("--decisions", rp.decisions, "Decisions file");
    s_rep->add_option("--importance", rp.importance, "Importance config (JSON)");
    s_rep->add_option("--generated-at", rp.generated_at, "Timestamp printed in reports (default: now, UTC)");
    s_rep->add_option("--out", rp.out, "Output directory")->required();

    Gradcheck gc;
    auto* s_gc = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
    s_gc->add_option("--seed", gc.seed, "Seed for model and batch");
    s_gc->add_option("--horizon", gc.horizon, "14 or 28");
    s_gc->add_option("--windows", gc.windows, "Batch size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (s_agg->parsed()) return do_aggregate(agg, *log);
        if (s_train->parsed()) return do_train(tr, *log);
        if (s_det->parsed()) return do_detect(det, *log);
        if (s_pp->parsed()) return do_postprocess(pp, *log);
        if (s_syn->parsed()) return do_synth(sy, *log);
        if (s_eval->parsed()) return do_eval(ev, *log);
        if (s_rep->parsed()) return do_report(rp, *log);
        if (s_gc->parsed()) return do_gradcheck(gc, *log);
    } catch (const UsageError& e) {
        log->error("{}", e.what());
        return kUsageError;
    } catch (const DataError& e) {
        log->error("{}", e.what());
        return kDataError;
    } catch (const std::exception& e) {
        log->error("internal error: {}", e.what());
        return kInternalError;
    }
    return kUsageError;
}

} // namespace healthwatch::cli
