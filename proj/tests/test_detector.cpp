#include <doctest.h>

#include <cmath>
#include <random>

#include "healthwatch/detector.hpp"
#include "healthwatch/error.hpp"
#include "support.hpp"

using namespace healthwatch;
using doctest::Approx;

namespace {

ForecastModel random_model(int horizon, std::uint64_t seed) {
    Hyperparams h;
    h.horizon = horizon;
    auto m = ForecastModel::initialize(h, seed);
    std::mt19937_64 rng(seed * 31 + 7);
    std::normal_distribution<double> g(0.0, 1.0);
    m.regression.irregularity_weight = g(rng);
    m.regression.irregularity_bias = g(rng);
    return m;
}

DetectionWindow random_window(int horizon, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> dow(0, 6);
    DetectionWindow w;
    w.key = testing::key();
    w.target = testing::day("2024-01-01") + std::chrono::days{dow(rng)};
    const double level = 5.0 * g(rng);
    const double amp = std::abs(g(rng));
    for (int i = 0; i < horizon; ++i) w.history.push_back(level + amp * std::sin(i * 0.9) + 0.3 * g(rng));
    w.observed = level + 2.0 * g(rng);
    w.seasonality = day_of_week_onehot(w.target);
    w.status = WindowStatus::valid;
    return w;
}

DetectionWindow window_of(std::vector<double> history, double observed) {
    DetectionWindow w;
    w.key = testing::key();
    w.target = testing::day("2024-02-01");
    w.history = std::move(history);
    w.observed = observed;
    w.seasonality = day_of_week_onehot(w.target);
    w.status = WindowStatus::valid;
    return w;
}

} // namespace

TEST_CASE("layer_normalize examples") {
    const std::vector<double> x{1, 2, 3};
    const auto n = layer_normalize(x);
    CHECK(n.values[0] == Approx(-1.224744871).epsilon(1e-9));
    CHECK(n.values[1] == Approx(0.0));
    CHECK(n.values[2] == Approx(1.224744871).epsilon(1e-9));
    CHECK(n.norm.mu == 2.0);
    CHECK(n.norm.sigma == Approx(0.8164965809).epsilon(1e-9));

    const std::vector<double> flat{5, 5, 5, 5};
    const auto c = layer_normalize(flat);
    CHECK(c.norm.sigma == kSigmaFloor);
    CHECK(c.norm.mu == 5.0);
    for (double v : c.values) CHECK(v == 0.0);
}

TEST_CASE("layer_normalize moments, affine invariance and inverse round trip") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(3.0, 7.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(28);
        for (auto& v : x) v = g(rng);
        const auto n = layer_normalize(x);
        double mean = 0.0, sq = 0.0;
        for (double v : n.values) mean += v;
        mean /= 28;
        for (double v : n.values) sq += (v - mean) * (v - mean);
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(sq / 28) - 1.0) < 1e-6);
        double worst = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            worst = std::max(worst, std::abs(inverse_normalize(n.values[i], n.norm) - x[i]));
        CHECK(worst < 1e-9);

        std::vector<double> y(x);
        for (auto& v : y) v = 2.5 * v - 4.0;
        const auto m = layer_normalize(y);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(m.values[i] == Approx(n.values[i]).epsilon(1e-9));
    }
    CHECK(inverse_normalize(0.0, {2.0, 0.8165}) == 2.0);
    CHECK(inverse_normalize(1.0, {0.0, 1.0}) == 1.0);
}

TEST_CASE("recent_omit") {
    std::vector<double> h(14);
    for (int i = 0; i < 14; ++i) h[i] = i;
    const auto kept = recent_omit(h, 3);
    REQUIRE(kept.size() == 11);
    CHECK(kept.front() == 0.0);
    CHECK(kept.back() == 10.0);
    CHECK(recent_omit(h, 0) == h);
    CHECK_THROWS_AS(recent_omit(h, 14), UsageError);
    CHECK_THROWS_AS(recent_omit(h, -1), UsageError);
}

TEST_CASE("irregularity score") {
    std::vector<double> periodic(28);
    for (int i = 0; i < 28; ++i) periodic[i] = std::sin(2 * M_PI * i / 7.0);
    const auto np = layer_normalize(periodic).values;
    CHECK(week_over_week_iqr(np) == Approx(0.0).epsilon(1e-12));
    CHECK(irregularity_score(np, 3.0, 0.7) == Approx(2.0 / (1.0 + std::exp(-0.7))));

    const std::vector<double> step{0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1};
    CHECK(week_over_week_iqr(layer_normalize(step).values) == 0.0);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    std::vector<double> noisy(28);
    for (auto& v : noisy) v = g(rng);
    CHECK(irregularity_score(layer_normalize(noisy).values, 0.0, 0.0) == 1.0);
    const double s = irregularity_score(layer_normalize(noisy).values, 5.0, -1.0);
    CHECK(s > 0.0);
    CHECK(s < 2.0);
}

TEST_CASE("severity and decision rule") {
    CHECK(severity(10, 8, 12, 16) == Approx(1.5));
    CHECK(severity(10, 10, 10, 11) == Approx(1.0 / kSeverityFloor));

    std::vector<double> h(28);
    for (int i = 0; i < 28; ++i) h[i] = (i % 2 == 0) ? 9.0 : 11.0;  // mu 10, sigma 1
    SUBCASE("inside bounds with high probability is normal") {
        const auto m = testing::fixed_model(28, 0.0, -2.0, 2.0, 0.9);
        const auto d = detect_point(window_of(h, 11.0), m);
        REQUIRE(d);
        CHECK(d->forecast.baseline == Approx(10.0));
        CHECK(d->forecast.lower == Approx(8.0));
        CHECK(d->forecast.upper == Approx(12.0));
        CHECK_FALSE(d->out_of_boundary);
        CHECK_FALSE(d->is_anomaly);
    }
    SUBCASE("outside bounds with probability below the threshold is normal") {
        const auto m = testing::fixed_model(28, 0.0, -2.0, 2.0, 0.1);
        const auto d = detect_point(window_of(h, 16.0), m);
        REQUIRE(d);
        CHECK(d->out_of_boundary);
        CHECK(d->anomaly_probability == Approx(0.1));
        CHECK_FALSE(d->is_anomaly);
        CHECK(d->severity == Approx(1.5));
        DetectOptions forecast_only;
        forecast_only.use_classifier = false;
        CHECK(detect_point(window_of(h, 16.0), m, forecast_only)->is_anomaly);
    }
    SUBCASE("outside bounds with high probability is anomalous") {
        const auto m = testing::fixed_model(28, 0.0, -2.0, 2.0, 0.2);
        CHECK(detect_point(window_of(h, 16.0), m)->is_anomaly);
        DetectOptions strict;
        strict.threshold = 0.5;
        CHECK_FALSE(detect_point(window_of(h, 16.0), m, strict)->is_anomaly);
    }
    SUBCASE("zero deviation features give the bias-path probability") {
        const auto m = testing::fixed_model(28, 0.0, 0.0, 0.0, 0.3);
        const auto d = detect_point(window_of(h, 10.0), m);
        const auto f = deviation_features(d->forecast, 10.0);
        CHECK(f[0] == Approx(0.0));
        CHECK(f[1] == Approx(0.0));
        CHECK(f[2] == Approx(0.0));
        CHECK(d->anomaly_probability == Approx(0.3));
    }
}

TEST_CASE("invalid windows") {
    const auto m = random_model(28, 1);
    DetectionWindow w;
    CHECK_THROWS_WITH_AS(forecast_forward(w, m), "invalid window", UsageError);
    CHECK_FALSE(detect_point(w, m).has_value());
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(forecast_forward(random_window(14, rng), m), UsageError);
}

TEST_CASE("S = 1 leaves the boundaries untouched and ordering always holds") {
    std::mt19937_64 rng(4);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto m = random_model(28, seed);
        for (int i = 0; i < 20; ++i) {
            const auto w = random_window(28, rng);
            const auto f = forecast_forward(w, m);
            CHECK(f.lower <= f.baseline);
            CHECK(f.baseline <= f.upper);
            const auto p = prepare_window(w, m.hyper);
            auto identity = m.regression;
            identity.irregularity_weight = identity.irregularity_bias = 0.0;
            auto amplified = m.regression;
            const auto a = regression_forward(identity, p.input, p.iqr);
            const auto b = regression_forward(amplified, p.input, p.iqr);
            CHECK(a.irregularity == 1.0);
            CHECK(a.baseline == b.baseline);
            // With S = 1 the bounds are the raw head outputs clamped to the baseline.
            CHECK(std::abs((b.upper - b.baseline)) ==
                  Approx(std::abs(a.upper - a.baseline) * b.irregularity).epsilon(1e-12));
        }
    }
}

TEST_CASE("affine equivariance of forecasts and decisions") {
    std::mt19937_64 rng(8);
    for (int h : {14, 28}) {
        const auto m = random_model(h, 11);
        for (int i = 0; i < 50; ++i) {
            const auto w = random_window(h, rng);
            const auto f = forecast_forward(w, m);
            const auto d = detect_point(w, m);
            for (auto [a, b] : {std::pair{2.0, 0.0}, {1.0, 5.0}, {0.5, -3.0}}) {
                auto t = w;
                for (auto& v : t.history) v = a * v + b;
                t.observed = a * w.observed + b;
                const auto g = forecast_forward(t, m);
                CHECK(g.baseline == Approx(a * f.baseline + b).epsilon(1e-6));
                CHECK(g.lower == Approx(a * f.lower + b).epsilon(1e-6));
                CHECK(g.upper == Approx(a * f.upper + b).epsilon(1e-6));
                const auto e = detect_point(t, m);
                CHECK(e->is_anomaly == d->is_anomaly);
                CHECK(e->anomaly_probability == Approx(d->anomaly_probability).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("classifier is scale independent by construction") {
    const auto m = random_model(28, 5);
    Forecast a;
    a.norm = {10.0, 2.0};
    a.baseline = 10.0;
    a.lower = 6.0;
    a.upper = 14.0;
    Forecast b = a;
    b.norm = {-3.0, 0.01};
    b.baseline = -3.0;
    b.lower = -3.02;
    b.upper = -2.98;
    CHECK(classifier_forward(a, 15.0, m) == Approx(classifier_forward(b, -2.975, m)).epsilon(1e-12));
}

TEST_CASE("is_anomaly implies out_of_boundary") {
    std::mt19937_64 rng(12);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = random_model(28, seed);
        for (int i = 0; i < 200; ++i) {
            const auto d = detect_point(random_window(28, rng), m);
            if (d->is_anomaly) CHECK(d->out_of_boundary);
            CHECK(d->anomaly_probability > 0.0);
            CHECK(d->anomaly_probability < 1.0);
            CHECK(d->severity >= 0.0);
        }
    }
}

TEST_CASE("detector routes windows by horizon") {
    Detector det;
    det.add(random_model(28, 1));
    std::mt19937_64 rng(1);
    CHECK(det.detect(random_window(28, rng)).has_value());
    CHECK_FALSE(det.detect(random_window(14, rng)).has_value());
    det.add(random_model(14, 2));
    CHECK(det.detect(random_window(14, rng)).has_value());

    std::vector<DetectionWindow> windows;
    for (int i = 0; i < 300; ++i) windows.push_back(random_window(i % 2 ? 14 : 28, rng));
    windows[7].status = WindowStatus::missing_in_window;
    const auto serial = detect_windows_serial(windows, det);
    const auto parallel = detect_windows(windows, det, {}, 4);
    REQUIRE(serial.size() == parallel.size());
    CHECK_FALSE(parallel[7].has_value());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        REQUIRE(serial[i].has_value() == parallel[i].has_value());
        if (serial[i]) {
            CHECK(serial[i]->forecast.baseline == parallel[i]->forecast.baseline);
            CHECK(serial[i]->is_anomaly == parallel[i]->is_anomaly);
        }
    }
}

TEST_CASE("hyperparameter validation") {
    Hyperparams h;
    CHECK_NOTHROW(h.validate());
    h.tau_lower = 0.99;
    CHECK_THROWS(h.validate());
    h = {};
    h.anomaly_threshold = 1.0;
    CHECK_THROWS(h.validate());
    h = {};
    h.recent_omit = 28;
    CHECK_THROWS(h.validate());
}
