// Parallel kernels against their serial references.
//   healthwatch_bench --benchmark_filter=Detect

#include <random>

#include <benchmark/benchmark.h>

#include "healthwatch/evalkit.hpp"
#include "healthwatch/health_stats.hpp"
#include "healthwatch/synth.hpp"
#include "healthwatch/training.hpp"

using namespace healthwatch;

namespace {

std::vector<ScoringEvent> make_events(std::size_t n) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> model(0, 15), day(0, 29);
    std::vector<ScoringEvent> events(n);
    for (auto& e : events) {
        e.model_id = "m" + std::to_string(model(rng));
        e.product_id = "p";
        e.timestamp_ms = 1'704'067'200'000LL + day(rng) * 86'400'000LL;
        e.score = g(rng);
        e.features["x"] = g(rng);
        e.features["y"] = g(rng) > 1.0 ? FeatureValue{std::monostate{}} : FeatureValue{g(rng)};
        e.features["c"] = std::string(g(rng) > 0 ? "a" : "b");
        e.features["emb"] = std::vector<double>{g(rng), g(rng), g(rng)};
    }
    return events;
}

const std::vector<ScoringEvent>& events() {
    static const auto e = make_events(100'000);
    return e;
}

const std::vector<LabeledSeries>& dataset() {
    static const auto d = [] {
        synth::Grid grid;
        grid.duration = {2, 5};
        std::vector<LabeledSeries> out;
        for (auto& s : synth::generate_dataset(grid, 60, 3)) out.push_back(std::move(s.record));
        return out;
    }();
    return d;
}

const Detector& detector() {
    static const Detector d({ForecastModel::initialize(TrainConfig{}.hyperparams(kShortHorizon), 1),
                             ForecastModel::initialize(TrainConfig{}.hyperparams(kLongHorizon), 2)});
    return d;
}

const std::vector<DetectionWindow>& windows() {
    static const auto w = eval::rolling_windows(dataset());
    return w;
}

void BM_AggregateSerial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(aggregate_daily_serial(events()));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(events().size()));
}

void BM_AggregateParallel(benchmark::State& state) {
    AggregationConfig config;
    config.workers = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(aggregate_daily(events(), config));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(events().size()));
}

void BM_DetectSerial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(detect_windows_serial(windows(), detector()));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(windows().size()));
}

void BM_DetectParallel(benchmark::State& state) {
    const int workers = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(detect_windows(windows(), detector(), {}, workers));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(windows().size()));
}

void BM_RollingSerial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(eval::rolling_detect_serial(dataset(), detector()));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(dataset().size()));
}

void BM_RollingParallel(benchmark::State& state) {
    const int workers = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(eval::rolling_detect(dataset(), detector(), {}, workers));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(dataset().size()));
}

} // namespace

BENCHMARK(BM_AggregateSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_AggregateParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DetectSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DetectParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RollingSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RollingParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
