#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "healthwatch/error.hpp"
#include "healthwatch/evalkit.hpp"
#include "healthwatch/io.hpp"
#include "healthwatch/synth.hpp"
#include "healthwatch/training.hpp"
#include "support.hpp"

using namespace healthwatch;
using namespace healthwatch::eval;
using testing::day;

namespace {

const Day kDay0 = day("2024-01-01");

LabelInterval iv(int a, int b) { return {kDay0 + std::chrono::days{a}, kDay0 + std::chrono::days{b}}; }

Detector fixed_detector(double p = 0.9, double half_width = 3.0) {
    return Detector({testing::fixed_model(14, 0.0, -half_width, half_width, p),
                     testing::fixed_model(28, 0.0, -half_width, half_width, p)});
}

/// Sine-like series with a large bump on `spike_days`.
LabeledSeries bumpy(std::string model, int length, std::set<int> spike_days, std::vector<LabelInterval> labels = {}) {
    LabeledSeries s;
    s.series = testing::series_of({}, kDay0);
    s.series.key.model_id = std::move(model);
    for (int t = 0; t < length; ++t) {
        double v = 10.0 + std::sin(2.0 * 3.141592653589793 * t / 7.0) + 0.05 * std::cos(1.7 * t);
        if (spike_days.contains(t)) v += 30.0;
        s.series.values.push_back(v);
    }
    s.labels = std::move(labels);
    return s;
}

std::vector<LabeledSeries> synthetic(std::size_t n, std::uint64_t seed) {
    synth::Grid grid;
    grid.duration = {2, 5};
    std::vector<LabeledSeries> out;
    for (auto& s : synth::generate_dataset(grid, n, seed)) out.push_back(std::move(s.record));
    return out;
}

} // namespace

TEST_CASE("chop_intervals examples") {
    CHECK(chop_intervals(std::vector{iv(1, 17)}) == std::vector{iv(1, 7), iv(8, 14), iv(15, 17)});
    CHECK(chop_intervals(std::vector{iv(1, 7)}) == std::vector{iv(1, 7)});
    CHECK(chop_intervals(std::vector{iv(1, 8)}) == std::vector{iv(1, 7), iv(8, 8)});
    CHECK(chop_intervals(std::vector<LabelInterval>{}).empty());
}

TEST_CASE("chop_intervals preserves day coverage") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> start(0, 100), len(1, 30);
    for (int trial = 0; trial < 200; ++trial) {
        const int a = start(rng);
        const auto in = iv(a, a + len(rng) - 1);
        const auto pieces = chop_intervals(std::vector{in});
        std::int64_t days = 0;
        Day next = in.start;
        for (const auto& p : pieces) {
            CHECK(p.start == next);
            CHECK(p.length() <= 7);
            days += p.length();
            next = p.end + std::chrono::days{1};
        }
        CHECK(days == in.length());
        CHECK(pieces.back().end == in.end);
    }
}

TEST_CASE("match_intervals examples") {
    auto c = match_intervals(std::vector{iv(11, 12)}, std::vector{iv(10, 12)});
    CHECK(c.tp == 1);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    c = match_intervals({}, std::vector{iv(10, 12)});
    CHECK(c.fn == 1);
    c = match_intervals(std::vector{iv(20, 21)}, {});
    CHECK(c.fp == 1);
    c = match_intervals(std::vector{iv(3, 8)}, std::vector{iv(1, 3), iv(8, 9)});
    CHECK(c.tp == 2);
    CHECK(c.fp == 0);
    REQUIRE(c.matches.size() == 1);
    CHECK(c.matches[0].label == iv(1, 3));
}

TEST_CASE("match_intervals agrees with a day-set oracle") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> count(0, 10), start(0, 60), len(1, 7);
    for (int seed = 0; seed < 100; ++seed) {
        std::vector<LabelInterval> predicted, labeled;
        for (int i = count(rng); i > 0; --i) {
            const int a = start(rng);
            predicted.push_back(iv(a, a + len(rng) - 1));
        }
        for (int i = count(rng); i > 0; --i) {
            const int a = start(rng);
            labeled.push_back(iv(a, a + len(rng) - 1));
        }
        auto day_set = [](const std::vector<LabelInterval>& v) {
            std::set<Day> s;
            for (const auto& in : v)
                for (Day d = in.start; d <= in.end; d += std::chrono::days{1}) s.insert(d);
            return s;
        };
        auto touches = [](const LabelInterval& in, const std::set<Day>& days) {
            for (Day d = in.start; d <= in.end; d += std::chrono::days{1})
                if (days.contains(d)) return true;
            return false;
        };
        const auto pd = day_set(predicted), ld = day_set(labeled);
        std::int64_t tp = 0, fn = 0, fp = 0;
        for (const auto& l : labeled) (touches(l, pd) ? tp : fn) += 1;
        for (const auto& p : predicted) fp += touches(p, ld) ? 0 : 1;
        const auto c = match_intervals(predicted, labeled);
        CHECK(c.tp == tp);
        CHECK(c.fn == fn);
        CHECK(c.fp == fp);
    }
}

TEST_CASE("compute_prf examples") {
    auto m = compute_prf(9, 1, 0);
    CHECK(m.precision == doctest::Approx(0.9));
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == doctest::Approx(18.0 / 19.0));
    m = compute_prf(0, 0, 0);
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
    m = compute_prf(1, 1, 1);
    CHECK(m.f1 == doctest::Approx(0.5));
    CHECK_THROWS_AS(compute_prf(-1, 0, 0), UsageError);
}

TEST_CASE("rolling detection over a 42-day series switches horizons") {
    const std::vector<LabeledSeries> data{bumpy("m", 42, {})};
    const auto decisions = rolling_detect(data, fixed_detector());
    REQUIRE(decisions.size() == 28);
    CHECK(decisions.front().date == kDay0 + std::chrono::days{14});
    CHECK(decisions.back().date == kDay0 + std::chrono::days{41});
    for (const auto& d : decisions) {
        const auto index = days_between(kDay0, d.date);
        CHECK(d.horizon == (index < 28 ? 14 : 28));
    }
    CHECK(rolling_windows(data).size() == 28);

    Detector long_only({testing::fixed_model(28, 0.0, -3.0, 3.0, 0.9)});
    CHECK(rolling_detect(data, long_only).size() == 14);
}

TEST_CASE("a missing day inside every window yields no decisions") {
    auto s = bumpy("m", 42, {});
    for (int t : {5, 15, 25, 35}) s.series.values[t].reset();
    const std::vector<LabeledSeries> data{s};
    CHECK(rolling_detect(data, fixed_detector()).empty());
}

TEST_CASE("forecast-only ablation uses the boundary check alone") {
    const std::vector<LabeledSeries> data{bumpy("m", 60, {45}, {iv(45, 45)})};
    const auto detector = fixed_detector(0.1);
    const auto gated = rolling_detect(data, detector);
    CHECK(std::ranges::none_of(gated, &DecisionRecord::is_anomaly));
    const auto forecast_only = rolling_detect(data, detector, DetectOptions{false, std::nullopt});
    for (const auto& d : forecast_only) CHECK(d.is_anomaly == d.out_of_boundary);
    CHECK(std::ranges::any_of(forecast_only, [](const DecisionRecord& d) {
        return d.is_anomaly && d.date == kDay0 + std::chrono::days{45};
    }));
}

TEST_CASE("parallel rolling detection matches the serial reference") {
    const auto data = synthetic(4, 3);
    Detector detector({ForecastModel::initialize(TrainConfig{}.hyperparams(14), 1),
                       ForecastModel::initialize(TrainConfig{}.hyperparams(28), 2)});
    const auto serial = rolling_detect_serial(data, detector);
    for (int workers : {1, 2, 4, 8}) CHECK(rolling_detect(data, detector, {}, workers) == serial);
}

TEST_CASE("evaluate scores synthetic spikes and is order independent") {
    std::vector<LabeledSeries> data{bumpy("a", 70, {40, 41}, {iv(40, 41)}), bumpy("b", 70, {50}, {}),
                                    bumpy("c", 70, {}, {iv(60, 61)})};
    const auto detector = fixed_detector();
    EvalOptions opts;
    opts.filters = false;
    const auto r = evaluate(data, detector, opts);
    CHECK(r.tp == 1);
    CHECK(r.fp >= 1);
    CHECK(r.fn == 1);
    CHECK(r.series == 3);
    CHECK(r.labeled_intervals == 2);
    CHECK(r.fingerprint.size() == 16);
    CHECK(r.wall_time_seconds >= 0.0);

    std::vector<LabeledSeries> reversed(data.rbegin(), data.rend());
    const auto again = evaluate(reversed, detector, opts);
    CHECK(again.tp == r.tp);
    CHECK(again.fp == r.fp);
    CHECK(again.fn == r.fn);
    CHECK(again.fingerprint == r.fingerprint);

    opts.filters = true;
    CHECK(fingerprint(detector, opts) != r.fingerprint);

    const auto j = to_json(r);
    for (const char* field : {"tp", "fp", "fn", "precision", "recall", "f1", "wall_time_s", "fingerprint"})
        CHECK(j.contains(field));
}

TEST_CASE("enabling filters never increases recall") {
    const auto data = synthetic(6, 12);
    Detector detector({ForecastModel::initialize(TrainConfig{}.hyperparams(14), 4),
                       ForecastModel::initialize(TrainConfig{}.hyperparams(28), 5)});
    EvalOptions off;
    off.filters = false;
    off.use_classifier = false;
    EvalOptions on = off;
    on.filters = true;
    on.filter_config.mtr_enabled = false;
    const auto a = evaluate(data, detector, off);
    const auto b = evaluate(data, detector, on);
    CHECK(b.recall <= a.recall);
    CHECK(b.predicted_intervals <= a.predicted_intervals);
}

TEST_CASE("external decisions are scored against labels") {
    std::vector<LabeledSeries> data{bumpy("m", 42, {}, {iv(30, 32)})};
    std::vector<DecisionRecord> decisions;
    for (int t = 14; t < 42; ++t) {
        DecisionRecord d;
        d.key = data[0].series.key;
        d.date = kDay0 + std::chrono::days{t};
        d.is_anomaly = t == 31 || t == 38;
        d.out_of_boundary = d.is_anomaly;
        d.severity = 2.0;
        decisions.push_back(d);
    }
    const auto r = score_decisions(data, decisions, FilterConfig::all_disabled());
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);
    CHECK(r.fn == 0);
    CHECK(r.precision == doctest::Approx(0.5));

    for (auto& d : decisions) d.key.model_id = "other";
    const auto unmatched = score_decisions(data, decisions, FilterConfig::all_disabled());
    CHECK(unmatched.tp == 0);
    CHECK(unmatched.fn == 1);
}

TEST_CASE("tune_threshold") {
    std::vector<LabeledSeries> data{bumpy("a", 70, {40}, {iv(40, 40)}), bumpy("b", 70, {55}, {iv(55, 55)})};
    const auto detector = fixed_detector(0.6);
    CHECK(tune_threshold(detector, data, std::vector{0.7, 0.5, 0.3}) == 0.3);
    CHECK(tune_threshold(detector, data, std::vector{0.9, 0.7}) == 0.7);
    CHECK(tune_threshold(detector, data, std::vector{0.9, 0.55}) == 0.55);
    CHECK_THROWS_AS(tune_threshold(detector, data, std::vector<double>{}), UsageError);
    CHECK_THROWS_AS(tune_threshold(detector, data, std::vector{1.5}), UsageError);
    std::vector<LabeledSeries> unlabeled{bumpy("a", 70, {40})};
    CHECK_THROWS_AS(tune_threshold(detector, unlabeled, std::vector{0.5}), UsageError);
}

TEST_CASE("timing harness") {
    const auto detector = fixed_detector();
    const auto none = timing_harness(detector, std::vector<DetectionWindow>{}, std::vector{1, 2});
    REQUIRE(none.size() == 2);
    CHECK(none[0].decisions == 0);
    CHECK(none[0].seconds < 0.05);

    const auto windows = rolling_windows(synthetic(40, 9));
    REQUIRE(windows.size() > 5000);
    const std::vector<int> one{1};
    const auto a = timing_harness(detector, windows, one, 3);
    const auto b = timing_harness(detector, windows, one, 3);
    CHECK(a[0].decisions == windows.size());
    CHECK(std::abs(a[0].seconds - b[0].seconds) <= 0.25 * std::max(a[0].seconds, b[0].seconds));
}

TEST_CASE("results file is replaced, not appended") {
    testing::TempDir dir;
    EvalResult r;
    r.tp = 3;
    write_results(dir / "r.jsonl", std::vector{r, r});
    write_results(dir / "r.jsonl", std::vector{r});
    CHECK(io::read_json_lines(dir / "r.jsonl").size() == 1);
}
