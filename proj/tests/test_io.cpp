#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "healthwatch/error.hpp"
#include "healthwatch/io.hpp"
#include "support.hpp"

using namespace healthwatch;
using testing::day;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

DecisionRecord sample_decision() {
    DecisionRecord d;
    d.key = testing::key("model, \"a\"", "feature");
    d.date = day("2024-02-29");
    d.horizon = 14;
    d.observed = 3.25;
    d.baseline = 1.0 / 3.0;
    d.lower = -0.1;
    d.upper = 2.0;
    d.anomaly_probability = 0.875;
    d.severity = 1.5;
    d.out_of_boundary = true;
    d.is_anomaly = true;
    return d;
}

} // namespace

TEST_CASE("stats csv round trip keeps missing values and exact doubles") {
    std::vector<DailyStatRow> rows{
        {"m,1", "f\"q\"", StatisticKind::feature_quantile(95), day("2024-01-02"), 0.1 + 0.2},
        {"m", "__score__", StatisticKind{StatisticKind::Kind::score_std}, day("2024-01-03"), std::nullopt},
        {"m", "__model__", StatisticKind{StatisticKind::Kind::traffic}, day("2024-01-03"), 1e300},
    };
    std::stringstream buf;
    io::write_stats(buf, rows);
    CHECK(buf.str().starts_with("model_id,entity,statistic,date,value\n"));
    CHECK(io::read_stats(buf) == rows);
}

TEST_CASE("stats csv rejects malformed input") {
    std::istringstream bad_header("a,b,c,d,e\n");
    CHECK_THROWS_AS(io::read_stats(bad_header), DataError);
    std::istringstream short_line("model_id,entity,statistic,date,value\nm,f,mean,2024-01-01\n");
    CHECK_THROWS_AS(io::read_stats(short_line), DataError);
    std::istringstream bad_value("model_id,entity,statistic,date,value\nm,f,mean,2024-01-01,abc\n");
    CHECK_THROWS_AS(io::read_stats(bad_value), DataError);
    std::istringstream bad_stat("model_id,entity,statistic,date,value\nm,f,median,2024-01-01,1\n");
    CHECK_THROWS(io::read_stats(bad_stat));
    std::istringstream quote("model_id,entity,statistic,date,value\n\"m,f,mean,2024-01-01,1\n");
    CHECK_THROWS_AS(io::read_stats(quote), DataError);
    CHECK_THROWS_AS(io::read_stats(std::filesystem::path("/nonexistent/stats.csv")), DataError);
}

TEST_CASE("dataset round trip") {
    testing::TempDir dir;
    LabeledSeries a{testing::series_of({1.0, std::nullopt, 3.5}), {{day("2024-01-02"), day("2024-01-03")}}};
    LabeledSeries b{testing::series_of({}, day("2023-12-31")), {}};
    b.series.key.entity = "g";
    const std::vector<LabeledSeries> data{a, b};
    io::write_dataset(dir / "d.jsonl", data);
    const auto back = io::read_dataset(dir / "d.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0].series.key == a.series.key);
    CHECK(back[0].series.start == a.series.start);
    CHECK(back[0].series.values == a.series.values);
    CHECK(back[0].labels == a.labels);
    CHECK(back[1].series.values.empty());
    CHECK(back[0].is_labeled_anomalous(day("2024-01-03")));
    CHECK_FALSE(back[0].is_labeled_anomalous(day("2024-01-01")));
}

TEST_CASE("dataset rejects malformed records") {
    testing::TempDir dir;
    const std::string base = R"({"model_id":"m","entity":"f","statistic":"mean","start_date":"2024-01-01",)";
    write_text(dir / "a.jsonl", base + R"("values":"x"})" "\n");
    CHECK_THROWS_AS(io::read_dataset(dir / "a.jsonl"), DataError);
    write_text(dir / "b.jsonl", base + R"("values":[1,"x"]})" "\n");
    CHECK_THROWS_AS(io::read_dataset(dir / "b.jsonl"), DataError);
    write_text(dir / "c.jsonl", base + R"("values":[1],"anomalies":[{"start":"2024-01-05","end":"2024-01-02"}]})" "\n");
    CHECK_THROWS_AS(io::read_dataset(dir / "c.jsonl"), DataError);
    write_text(dir / "d.jsonl", "{not json\n");
    CHECK_THROWS_AS(io::read_dataset(dir / "d.jsonl"), DataError);
    write_text(dir / "e.jsonl", R"({"model_id":"","entity":"f","statistic":"mean","start_date":"2024-01-01","values":[]})" "\n");
    CHECK_THROWS_AS(io::read_dataset(dir / "e.jsonl"), DataError);
    write_text(dir / "f.jsonl", "\n\n" + base + R"("values":[2]})" "\n\n");
    CHECK(io::read_dataset(dir / "f.jsonl").size() == 1);
}

TEST_CASE("decisions and intervals share one file") {
    testing::TempDir dir;
    const auto d = sample_decision();
    AnomalyInterval in;
    in.key = d.key;
    in.start = d.date;
    in.end = d.date + std::chrono::days{1};
    in.duration = 2;
    in.severities = {1.5, 0.25};
    in.max_severity = 1.5;
    in.pattern = Pattern::spike;
    in.trace.duration = true;
    in.trace.severity = false;
    io::write_decisions(dir / "dec.jsonl", std::vector{d, d}, std::vector{in});
    const auto decisions = io::read_decisions(dir / "dec.jsonl");
    REQUIRE(decisions.size() == 2);
    CHECK(decisions[0] == d);
    const auto intervals = io::read_intervals(dir / "dec.jsonl");
    REQUIRE(intervals.size() == 1);
    CHECK(intervals[0] == in);
    const auto j = io::to_json(in);
    CHECK(j["filters"]["concurrency"] == "disabled");
    CHECK(j["filters"]["severity"] == "fail");
    CHECK(j["kept"] == false);
}

TEST_CASE("alerts round trip") {
    testing::TempDir dir;
    AnomalyInterval in;
    in.key = testing::key();
    in.start = day("2024-03-01");
    in.end = day("2024-03-04");
    in.duration = 4;
    in.severities = {2, 2, 3, 2};
    in.max_severity = 3;
    in.pattern = Pattern::level_shift;
    ModelAlert a{"m", in.start, in.end, {in}, 0.2, GroupingRule::entity_subset};
    ModelAlert b{"n", in.start, in.end, {in}, std::nullopt, GroupingRule::any_entity};
    io::write_alerts(dir / "alerts.jsonl", std::vector{a, b});
    const auto back = io::read_alerts(dir / "alerts.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0].model_id == "m");
    CHECK(back[0].traffic_ratio == 0.2);
    CHECK(back[0].rule == GroupingRule::entity_subset);
    CHECK(back[0].intervals == a.intervals);
    CHECK_FALSE(back[1].traffic_ratio.has_value());

    write_text(dir / "empty.jsonl", R"({"model_id":"m","start":"2024-01-01","end":"2024-01-01","rule":"or","intervals":[]})" "\n");
    CHECK_THROWS_AS(io::read_alerts(dir / "empty.jsonl"), DataError);
}
