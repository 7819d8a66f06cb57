#include "healthwatch/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "healthwatch/error.hpp"

namespace healthwatch::io {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    return in;
}

template <class T>
T get_field(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw DataError(std::string("missing field '") + name + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw DataError(std::string("field '") + name + "' has the wrong type");
    }
}

SeriesKey key_from_json(const json& j) {
    SeriesKey key{get_field<std::string>(j, "model_id"), get_field<std::string>(j, "entity"),
                  StatisticKind::parse(get_field<std::string>(j, "statistic"))};
    if (key.model_id.empty() || key.entity.empty()) throw DataError("series key fields must be non-empty");
    return key;
}

void put_key(json& j, const SeriesKey& key) {
    j["model_id"] = key.model_id;
    j["entity"] = key.entity;
    j["statistic"] = key.statistic.name();
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw DataError("unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

} // namespace

json to_json(const LabeledSeries& record) {
    json j;
    put_key(j, record.series.key);
    j["start_date"] = format_iso_date(record.series.start);
    json values = json::array();
    for (const auto& v : record.series.values) values.push_back(optional_number(v));
    j["values"] = std::move(values);
    json anomalies = json::array();
    for (const auto& l : record.labels)
        anomalies.push_back({{"start", format_iso_date(l.start)}, {"end", format_iso_date(l.end)}});
    j["anomalies"] = std::move(anomalies);
    return j;
}

LabeledSeries labeled_series_from_json(const json& j) {
    LabeledSeries r;
    r.series.key = key_from_json(j);
    r.series.start = parse_iso_date(get_field<std::string>(j, "start_date"));
    const auto values = j.find("values");
    if (values == j.end() || !values->is_array()) throw DataError("'values' must be an array");
    for (const auto& v : *values) {
        if (v.is_null()) r.series.values.emplace_back();
        else if (v.is_number()) r.series.values.emplace_back(v.get<double>());
        else throw DataError("'values' entries must be numbers or null");
    }
    if (auto it = j.find("anomalies"); it != j.end()) {
        if (!it->is_array()) throw DataError("'anomalies' must be an array");
        for (const auto& a : *it) {
            LabelInterval l{parse_iso_date(get_field<std::string>(a, "start")),
                            parse_iso_date(get_field<std::string>(a, "end"))};
            if (l.end < l.start) throw DataError("anomaly interval ends before it starts");
            r.labels.push_back(l);
        }
    }
    return r;
}

std::vector<json> read_json_lines(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<json> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const LabeledSeries> dataset) {
    auto out = open_out(path);
    for (const auto& r : dataset) out << to_json(r).dump() << '\n';
}

std::vector<LabeledSeries> read_dataset(const std::filesystem::path& path) {
    std::vector<LabeledSeries> out;
    std::size_t n = 0;
    for (const auto& j : read_json_lines(path)) {
        ++n;
        try {
            out.push_back(labeled_series_from_json(j));
        } catch (const DataError& e) {
            throw DataError(path.string() + " record " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

void write_stats(std::ostream& out, std::span<const DailyStatRow> rows) {
    out << "model_id,entity,statistic,date,value\n";
    for (const auto& r : rows) {
        out << csv_field(r.model_id) << ',' << csv_field(r.entity) << ',' << r.statistic.name() << ','
            << format_iso_date(r.date) << ',';
        if (r.value) out << format_double(*r.value);
        out << '\n';
    }
}

void write_stats(const std::filesystem::path& path, std::span<const DailyStatRow> rows) {
    auto out = open_out(path);
    write_stats(out, rows);
}

std::vector<DailyStatRow> read_stats(std::istream& in) {
    std::vector<DailyStatRow> rows;
    std::string line;
    if (!std::getline(in, line)) return rows;
    if (split_csv_line(line) != std::vector<std::string>{"model_id", "entity", "statistic", "date", "value"})
        throw DataError("stats file header must be model_id,entity,statistic,date,value");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 5) throw DataError("stats line " + std::to_string(line_no) + ": expected 5 fields");
        DailyStatRow row{f[0], f[1], StatisticKind::parse(f[2]), parse_iso_date(f[3]), std::nullopt};
        if (!f[4].empty()) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(), v);
            if (ec != std::errc{} || ptr != f[4].data() + f[4].size())
                throw DataError("stats line " + std::to_string(line_no) + ": bad value '" + f[4] + "'");
            row.value = v;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<DailyStatRow> read_stats(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_stats(in);
}

json to_json(const DecisionRecord& d) {
    json j;
    j["record"] = "decision";
    put_key(j, d.key);
    j["date"] = format_iso_date(d.date);
    j["horizon"] = d.horizon;
    j["observed"] = d.observed;
    j["baseline"] = d.baseline;
    j["lower"] = d.lower;
    j["upper"] = d.upper;
    j["p_anomaly"] = d.anomaly_probability;
    j["severity"] = d.severity;
    j["out_of_boundary"] = d.out_of_boundary;
    j["is_anomaly"] = d.is_anomaly;
    return j;
}

DecisionRecord decision_from_json(const json& j) {
    DecisionRecord d;
    d.key = key_from_json(j);
    d.date = parse_iso_date(get_field<std::string>(j, "date"));
    d.horizon = j.value("horizon", 0);
    d.observed = get_field<double>(j, "observed");
    d.baseline = get_field<double>(j, "baseline");
    d.lower = get_field<double>(j, "lower");
    d.upper = get_field<double>(j, "upper");
    d.anomaly_probability = get_field<double>(j, "p_anomaly");
    d.severity = get_field<double>(j, "severity");
    d.out_of_boundary = get_field<bool>(j, "out_of_boundary");
    d.is_anomaly = get_field<bool>(j, "is_anomaly");
    return d;
}

namespace {

json trace_to_json(const FilterTrace& t) {
    auto field = [](const std::optional<bool>& v) -> json {
        if (!v) return "disabled";
        return *v ? "pass" : "fail";
    };
    return {{"duration", field(t.duration)},
            {"severity", field(t.severity)},
            {"concurrency", field(t.concurrency)},
            {"mtr", field(t.mtr)}};
}

FilterTrace trace_from_json(const json& j) {
    auto field = [&](const char* name) -> std::optional<bool> {
        const auto v = j.value(name, std::string("disabled"));
        if (v == "pass") return true;
        if (v == "fail") return false;
        if (v == "disabled") return std::nullopt;
        throw DataError("bad filter outcome '" + v + "'");
    };
    return {field("duration"), field("severity"), field("concurrency"), field("mtr")};
}

} // namespace

json to_json(const AnomalyInterval& in) {
    json j;
    j["record"] = "interval";
    put_key(j, in.key);
    j["start"] = format_iso_date(in.start);
    j["end"] = format_iso_date(in.end);
    j["duration"] = in.duration;
    j["max_severity"] = in.max_severity;
    j["pattern"] = to_string(in.pattern);
    j["severities"] = in.severities;
    j["filters"] = trace_to_json(in.trace);
    j["kept"] = in.trace.passed();
    return j;
}

AnomalyInterval interval_from_json(const json& j) {
    AnomalyInterval in;
    in.key = key_from_json(j);
    in.start = parse_iso_date(get_field<std::string>(j, "start"));
    in.end = parse_iso_date(get_field<std::string>(j, "end"));
    in.duration = get_field<int>(j, "duration");
    in.max_severity = get_field<double>(j, "max_severity");
    in.pattern = parse_pattern(get_field<std::string>(j, "pattern"));
    in.severities = get_field<std::vector<double>>(j, "severities");
    if (auto it = j.find("filters"); it != j.end()) in.trace = trace_from_json(*it);
    return in;
}

json to_json(const ModelAlert& a) {
    json j;
    j["model_id"] = a.model_id;
    j["start"] = format_iso_date(a.start);
    j["end"] = format_iso_date(a.end);
    j["rule"] = to_string(a.rule);
    j["traffic_ratio"] = optional_number(a.traffic_ratio);
    json intervals = json::array();
    for (const auto& in : a.intervals) intervals.push_back(to_json(in));
    j["intervals"] = std::move(intervals);
    return j;
}

ModelAlert alert_from_json(const json& j) {
    ModelAlert a;
    a.model_id = get_field<std::string>(j, "model_id");
    a.start = parse_iso_date(get_field<std::string>(j, "start"));
    a.end = parse_iso_date(get_field<std::string>(j, "end"));
    a.rule = j.value("rule", std::string("or")) == "subset-or" ? GroupingRule::entity_subset : GroupingRule::any_entity;
    if (auto it = j.find("traffic_ratio"); it != j.end() && it->is_number()) a.traffic_ratio = it->get<double>();
    for (const auto& in : get_field<json>(j, "intervals")) a.intervals.push_back(interval_from_json(in));
    if (a.intervals.empty()) throw DataError("alert for model '" + a.model_id + "' has no intervals");
    return a;
}

void write_decisions(const std::filesystem::path& path, std::span<const DecisionRecord> decisions,
                     std::span<const AnomalyInterval> intervals) {
    auto out = open_out(path);
    for (const auto& d : decisions) out << to_json(d).dump() << '\n';
    for (const auto& in : intervals) out << to_json(in).dump() << '\n';
}

std::vector<DecisionRecord> read_decisions(const std::filesystem::path& path) {
    std::vector<DecisionRecord> out;
    for (const auto& j : read_json_lines(path)) {
        if (j.value("record", std::string("decision")) == "decision") out.push_back(decision_from_json(j));
    }
    return out;
}

std::vector<AnomalyInterval> read_intervals(const std::filesystem::path& path) {
    std::vector<AnomalyInterval> out;
    for (const auto& j : read_json_lines(path)) {
        if (j.value("record", std::string()) == "interval") out.push_back(interval_from_json(j));
    }
    return out;
}

void write_alerts(const std::filesystem::path& path, std::span<const ModelAlert> alerts) {
    auto out = open_out(path);
    for (const auto& a : alerts) out << to_json(a).dump() << '\n';
}

std::vector<ModelAlert> read_alerts(const std::filesystem::path& path) {
    std::vector<ModelAlert> out;
    for (const auto& j : read_json_lines(path)) out.push_back(alert_from_json(j));
    return out;
}

} // namespace healthwatch::io
