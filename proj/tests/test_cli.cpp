#include <doctest.h>

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "healthwatch/cli.hpp"
#include "healthwatch/io.hpp"
#include "support.hpp"

using namespace healthwatch;

namespace {

struct Result {
    int code = 0;
    std::string out;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "healthwatch");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream captured;
    auto* old = std::cout.rdbuf(captured.rdbuf());
    const int code = cli::run(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old);
    return {code, captured.str()};
}

/// Two models of one product over 60 days; model "a" has a feature shift on days 50-52.
void write_events(const std::filesystem::path& path) {
    std::ofstream out(path);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::int64_t day_ms = 86'400'000;
    const std::int64_t t0 = 1'704'067'200'000;  // 2024-01-01T00:00:00Z
    for (int d = 0; d < 60; ++d) {
        for (const char* model : {"a", "b"}) {
            for (int k = 0; k < 20; ++k) {
                double x = g(rng);
                if (std::string(model) == "a" && d >= 50 && d <= 52) x += 8.0;
                nlohmann::json e{{"model_id", model},
                                 {"product_id", "p"},
                                 {"timestamp", t0 + d * day_ms + k * 1000},
                                 {"score", 0.5 + 0.1 * g(rng)},
                                 {"features", {{"x", x}, {"c", k % 2 ? "u" : "v"}, {"gap", nullptr}}}};
                out << e.dump() << '\n';
            }
        }
    }
    out << "{broken\n";
}

} // namespace

TEST_CASE("end-to-end pipeline through the command line") {
    testing::TempDir dir;
    const auto p = [&](const char* name) { return (dir / name).string(); };
    write_events(dir / "events.jsonl");

    CHECK(run({"aggregate", "--events", p("events.jsonl"), "--out", p("stats.csv")}).code == 0);
    CHECK(run({"aggregate", "--events", p("events.jsonl"), "--out", p("strict.csv"), "--strict"}).code == 3);
    const auto stats = io::read_stats(dir / "stats.csv");
    CHECK(std::ranges::any_of(stats, [](const DailyStatRow& r) {
        return r.entity == kModelEntity && r.statistic.kind() == StatisticKind::Kind::traffic_ratio && r.value == 0.5;
    }));

    CHECK(run({"synth", "--n", "6", "--seed", "3", "--out", p("synth")}).code == 0);
    CHECK(std::filesystem::exists(dir / "synth" / "manifest.jsonl"));
    CHECK(run({"train", "--data", p("synth/dataset.jsonl"), "--out", p("model.bin"), "--epochs", "2", "--seed", "1"})
              .code == 0);

    CHECK(run({"detect", "--model", p("model.bin"), "--stats", p("stats.csv"), "--out", p("decisions.jsonl")}).code == 0);
    const auto decisions = io::read_decisions(dir / "decisions.jsonl");
    CHECK_FALSE(decisions.empty());
    CHECK(std::ranges::none_of(decisions, [](const DecisionRecord& d) { return d.key.entity == kModelEntity; }));

    CHECK(run({"postprocess", "--decisions", p("decisions.jsonl"), "--stats", p("stats.csv"), "--out", p("pp.jsonl"),
               "--alerts", p("alerts.jsonl"), "--no-filters"})
              .code == 0);
    CHECK(io::read_decisions(dir / "pp.jsonl").size() == decisions.size());

    const auto rep = run({"report", "--alerts", p("alerts.jsonl"), "--stats", p("stats.csv"), "--decisions",
                          p("pp.jsonl"), "--generated-at", "2024-03-01T00:00:00Z", "--out", p("reports")});
    const auto alerts = io::read_alerts(dir / "alerts.jsonl");
    CHECK(rep.code == (alerts.empty() ? 4 : 0));
    if (!alerts.empty()) CHECK(std::filesystem::exists(dir / "reports"));

    const auto ev = run({"eval", "--data", p("synth/dataset.jsonl"), "--model", p("model.bin"), "--filters", "off",
                         "--timing", "1,2", "--out", p("results.jsonl")});
    CHECK(ev.code == 0);
    const auto j = nlohmann::json::parse(ev.out);
    CHECK(j.contains("f1"));
    CHECK(j.contains("fingerprint"));

    CHECK(run({"detect", "--model", p("model.bin"), "--data", p("synth/dataset.jsonl"), "--out", p("d2.jsonl"),
               "--classifier", "off"})
              .code == 0);
    CHECK(run({"eval", "--data", p("synth/dataset.jsonl"), "--decisions", p("d2.jsonl"), "--out", p("r2.jsonl")}).code ==
          0);
}

TEST_CASE("report with no alerts exits with the nothing-to-report status") {
    testing::TempDir dir;
    { std::ofstream out(dir / "alerts.jsonl"); }
    CHECK(run({"report", "--alerts", (dir / "alerts.jsonl").string(), "--out", (dir / "r").string()}).code ==
          cli::kNothingToReport);
    CHECK_FALSE(std::filesystem::exists(dir / "r" / "index.html"));
}

TEST_CASE("usage and data errors map to exit codes") {
    CHECK(run({}).code == cli::kUsageError);
    CHECK(run({"frobnicate"}).code == cli::kUsageError);
    CHECK(run({"train", "--out", "/tmp/x.bin"}).code == cli::kUsageError);
    CHECK(run({"detect", "--model", "m", "--out", "o"}).code == cli::kUsageError);
    CHECK(run({"detect", "--model", "m", "--stats", "s", "--data", "d", "--out", "o"}).code == cli::kUsageError);
    CHECK(run({"train", "--data", "/nonexistent/data.jsonl", "--out", "/tmp/x.bin"}).code == cli::kUsageError);
    CHECK(run({"train", "--data", "/nonexistent/data.jsonl", "--out", "/tmp/x.bin", "--horizon", "7"}).code ==
          cli::kUsageError);
    CHECK(run({"--help"}).code == cli::kOk);

    testing::TempDir dir;
    {
        std::ofstream out(dir / "bad.jsonl");
        out << "{\"model_id\": 3}\n";
    }
    CHECK(run({"train", "--data", (dir / "bad.jsonl").string(), "--out", (dir / "m.bin").string()}).code ==
          cli::kDataError);
}

TEST_CASE("gradcheck prints the maximum relative error") {
    const auto r = run({"gradcheck", "--seed", "2", "--horizon", "14", "--windows", "6"});
    CHECK(r.code == 0);
    CHECK(r.out.starts_with("max relative gradient error: "));
    const double err = std::stod(r.out.substr(std::string("max relative gradient error: ").size()));
    CHECK(err < 1e-3);
}
