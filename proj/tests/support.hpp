#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "healthwatch/detector.hpp"
#include "healthwatch/series.hpp"

namespace testing {

/// Directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("healthwatch-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline healthwatch::Day day(const char* iso) { return healthwatch::parse_iso_date(iso); }

inline healthwatch::SeriesKey key(std::string model = "m", std::string entity = "f") {
    return {std::move(model), std::move(entity), healthwatch::StatisticKind{healthwatch::StatisticKind::Kind::mean}};
}

inline healthwatch::UnivariateSeries series_of(std::vector<std::optional<double>> values,
                                               healthwatch::Day start = day("2024-01-01")) {
    return {key(), start, std::move(values)};
}

/// All regression weights zero, so the normalized forecast is (base, lo, hi) for every window,
/// and a classifier that always outputs `p`.
inline healthwatch::ForecastModel fixed_model(int horizon, double base, double lo, double hi, double p) {
    healthwatch::Hyperparams h;
    h.horizon = horizon;
    auto m = healthwatch::ForecastModel::initialize(h, 1);
    for (auto& l : m.regression.trunk) l.zero();
    for (auto& head : m.regression.heads)
        for (auto& l : head) l.zero();
    m.regression.trunk[2].bias.assign(8, 1.0);
    m.regression.heads[healthwatch::kBaselineHead][0].bias.assign(4, 0.0);
    m.regression.heads[healthwatch::kBaselineHead][1].bias[0] = base;
    m.regression.heads[healthwatch::kLowerHead][1].bias[0] = lo;
    m.regression.heads[healthwatch::kUpperHead][1].bias[0] = hi;
    for (auto& l : m.classifier.layers) l.zero();
    m.classifier.layers[2].bias[0] = std::log(p / (1.0 - p));
    return m;
}

} // namespace testing
