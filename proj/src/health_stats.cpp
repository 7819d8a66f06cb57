#include "healthwatch/health_stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "healthwatch/error.hpp"
#include "parallel.hpp"

namespace healthwatch {

using nlohmann::json;

ScoringEvent parse_event_line(std::string_view line) {
    json record;
    try {
        record = json::parse(line);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) throw DataError("record is not an object");

    auto require = [&](const char* field) -> const json& {
        auto it = record.find(field);
        if (it == record.end()) throw DataError(std::string("missing field '") + field + "'");
        return *it;
    };

    ScoringEvent event;
    const json& model = require("model_id");
    const json& product = require("product_id");
    if (!model.is_string() || model.get<std::string>().empty()) throw DataError("model_id must be a non-empty string");
    if (!product.is_string() || product.get<std::string>().empty())
        throw DataError("product_id must be a non-empty string");
    event.model_id = model.get<std::string>();
    event.product_id = product.get<std::string>();

    const json& ts = require("timestamp");
    if (!ts.is_number_integer()) throw DataError("timestamp must be integer epoch milliseconds");
    event.timestamp_ms = ts.get<std::int64_t>();

    const json& score = require("score");
    if (!score.is_number()) throw DataError("score must be a number");
    event.score = score.get<double>();
    if (!std::isfinite(event.score)) throw DataError("score must be finite");

    const json& features = require("features");
    if (!features.is_object()) throw DataError("features must be an object");
    for (const auto& [name, value] : features.items()) {
        if (value.is_null()) {
            event.features.emplace(name, std::monostate{});
        } else if (value.is_number()) {
            event.features.emplace(name, value.get<double>());
        } else if (value.is_string()) {
            event.features.emplace(name, value.get<std::string>());
        } else if (value.is_array()) {
            std::vector<double> vec;
            vec.reserve(value.size());
            for (const auto& x : value) {
                if (!x.is_number()) throw DataError("feature '" + name + "' vector holds a non-number");
                vec.push_back(x.get<double>());
            }
            event.features.emplace(name, std::move(vec));
        } else {
            throw DataError("feature '" + name + "' has unsupported type");
        }
    }
    return event;
}

ParseResult parse_events(std::istream& in, bool strict) {
    ParseResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            result.events.push_back(parse_event_line(line));
        } catch (const DataError& e) {
            if (strict) throw DataError("line " + std::to_string(line_no) + ": " + e.what());
            ++result.rejects;
        }
    }
    return result;
}

ParseResult parse_events(const std::filesystem::path& path, bool strict) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read event log " + path.string());
    return parse_events(in, strict);
}

std::vector<std::pair<std::string, double>> expand_nonscalar_feature(const std::string& name,
                                                                     const FeatureValue& value) {
    std::vector<std::pair<std::string, double>> out;
    if (const auto* category = std::get_if<std::string>(&value)) {
        out.emplace_back(name + "=" + *category, 1.0);
    } else if (const auto* vec = std::get_if<std::vector<double>>(&value)) {
        out.reserve(vec->size());
        for (std::size_t i = 0; i < vec->size(); ++i) {
            out.emplace_back(name + "[" + std::to_string(i) + "]", (*vec)[i]);
        }
    }
    return out;
}

double AggregationConfig::default_for(const std::string& feature) const {
    auto it = feature_defaults.find(feature);
    return it == feature_defaults.end() ? default_value : it->second;
}

double nearest_rank(std::span<const double> sorted, int percent) {
    const std::size_t n = sorted.size();
    // ceil(percent * n / 100) in integers
    std::size_t rank = (static_cast<std::size_t>(percent) * n + 99) / 100;
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

namespace {

struct EntityAccumulator {
    std::vector<double> values;
    std::size_t nondefault = 0;
    double default_value = 0.0;

    void add(double v) {
        values.push_back(v);
        if (v != default_value) ++nondefault;
    }
};

struct Partition {
    std::string model_id;
    Day date;
    std::vector<const ScoringEvent*> events;
};

void emit_distribution(std::vector<DailyStatRow>& out, const std::string& model, const std::string& entity, Day date,
                       std::vector<double>& values, bool score) {
    using K = StatisticKind::Kind;
    std::ranges::sort(values);
    std::optional<double> mean, stddev;
    if (!values.empty()) {
        double sum = 0.0;
        for (double v : values) sum += v;
        const double m = sum / static_cast<double>(values.size());
        double ss = 0.0;
        for (double v : values) ss += (v - m) * (v - m);
        mean = m;
        stddev = std::sqrt(ss / static_cast<double>(values.size()));
    }
    out.push_back({model, entity, StatisticKind{score ? K::score_mean : K::mean}, date, mean});
    out.push_back({model, entity, StatisticKind{score ? K::score_std : K::std}, date, stddev});
    for (int p : kQuantilePercents) {
        std::optional<double> q;
        if (!values.empty()) q = nearest_rank(values, p);
        out.push_back({model, entity,
                       score ? StatisticKind::score_quantile(p) : StatisticKind::feature_quantile(p), date, q});
    }
}

std::vector<DailyStatRow> aggregate_partition(const Partition& part, const AggregationConfig& config) {
    using K = StatisticKind::Kind;
    const auto n_events = part.events.size();

    // Per-day vocabulary for categorical features and the widest vector seen per embedding feature.
    std::map<std::string, std::set<std::string>> vocab;
    std::map<std::string, std::size_t> vector_dims;
    std::set<std::string> scalar_names;
    for (const ScoringEvent* e : part.events) {
        for (const auto& [name, value] : e->features) {
            if (const auto* c = std::get_if<std::string>(&value)) {
                vocab[name].insert(*c);
            } else if (const auto* v = std::get_if<std::vector<double>>(&value)) {
                auto& dims = vector_dims[name];
                dims = std::max(dims, v->size());
            } else if (std::holds_alternative<double>(value)) {
                scalar_names.insert(name);
            }
        }
    }

    std::map<std::string, EntityAccumulator> entities;
    for (const auto& name : scalar_names) entities[name].default_value = config.default_for(name);
    for (const auto& [name, cats] : vocab)
        for (const auto& c : cats) entities[name + "=" + c].default_value = 0.0;
    for (const auto& [name, dims] : vector_dims)
        for (std::size_t i = 0; i < dims; ++i)
            entities[name + "[" + std::to_string(i) + "]"].default_value = config.default_for(name);

    std::vector<double> scores;
    scores.reserve(n_events);
    for (const ScoringEvent* e : part.events) {
        scores.push_back(e->score);
        for (const auto& [name, value] : e->features) {
            if (const auto* x = std::get_if<double>(&value)) {
                entities[name].add(*x);
            } else if (const auto* c = std::get_if<std::string>(&value)) {
                for (const auto& cat : vocab[name]) entities[name + "=" + cat].add(cat == *c ? 1.0 : 0.0);
            } else if (const auto* v = std::get_if<std::vector<double>>(&value)) {
                for (std::size_t i = 0; i < v->size(); ++i)
                    entities[name + "[" + std::to_string(i) + "]"].add((*v)[i]);
            }
        }
    }

    std::vector<DailyStatRow> out;
    const double total = static_cast<double>(n_events);
    for (auto& [entity, acc] : entities) {
        const double present = static_cast<double>(acc.values.size());
        const double nondefault = static_cast<double>(acc.nondefault);
        emit_distribution(out, part.model_id, entity, part.date, acc.values, false);
        out.push_back({part.model_id, entity, StatisticKind{K::coverage_nondefault}, part.date, nondefault / total});
        out.push_back({part.model_id, entity, StatisticKind{K::coverage_nonmissing}, part.date, present / total});
    }
    emit_distribution(out, part.model_id, std::string(kScoreEntity), part.date, scores, true);
    out.push_back({part.model_id, std::string(kModelEntity), StatisticKind{K::traffic}, part.date, total});

    std::ranges::sort(out, [](const DailyStatRow& a, const DailyStatRow& b) {
        return std::tie(a.entity, a.statistic) < std::tie(b.entity, b.statistic);
    });
    return out;
}

std::vector<Partition> partition_events(std::span<const ScoringEvent> events) {
    std::map<std::pair<std::string, Day>, std::vector<const ScoringEvent*>> groups;
    for (const auto& e : events) groups[{e.model_id, day_from_epoch_ms(e.timestamp_ms)}].push_back(&e);
    std::vector<Partition> parts;
    parts.reserve(groups.size());
    for (auto& [key, evs] : groups) parts.push_back({key.first, key.second, std::move(evs)});
    return parts;
}

std::vector<DailyStatRow> concat(std::vector<std::vector<DailyStatRow>>& chunks) {
    std::size_t total = 0;
    for (const auto& c : chunks) total += c.size();
    std::vector<DailyStatRow> out;
    out.reserve(total);
    for (auto& c : chunks) std::ranges::move(c, std::back_inserter(out));
    return out;
}

} // namespace

std::vector<DailyStatRow> aggregate_daily(std::span<const ScoringEvent> events, const AggregationConfig& config) {
    const auto parts = partition_events(events);
    std::vector<std::vector<DailyStatRow>> chunks(parts.size());
    const auto n = static_cast<std::ptrdiff_t>(parts.size());
#pragma omp parallel for schedule(dynamic) num_threads(detail::resolve_workers(config.workers))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        chunks[i] = aggregate_partition(parts[i], config);
    }
    return concat(chunks);
}

std::vector<DailyStatRow> aggregate_daily_serial(std::span<const ScoringEvent> events,
                                                 const AggregationConfig& config) {
    const auto parts = partition_events(events);
    std::vector<std::vector<DailyStatRow>> chunks;
    chunks.reserve(parts.size());
    for (const auto& part : parts) chunks.push_back(aggregate_partition(part, config));
    return concat(chunks);
}

std::map<std::string, std::string> model_products(std::span<const ScoringEvent> events) {
    std::map<std::string, std::string> out;
    for (const auto& e : events) {
        auto [it, inserted] = out.emplace(e.model_id, e.product_id);
        if (!inserted && it->second != e.product_id) {
            throw DataError("model '" + e.model_id + "' appears under products '" + it->second + "' and '" +
                            e.product_id + "'");
        }
    }
    return out;
}

std::vector<DailyStatRow> compute_traffic_ratio(std::span<const DailyStatRow> traffic_rows,
                                                const std::map<std::string, std::string>& model_to_product) {
    std::map<std::pair<std::string, Day>, double> totals;
    auto product_of = [&](const std::string& model) -> const std::string& {
        auto it = model_to_product.find(model);
        if (it == model_to_product.end()) throw DataError("model '" + model + "' has no product assignment");
        return it->second;
    };
    for (const auto& row : traffic_rows) {
        if (row.statistic.kind() != StatisticKind::Kind::traffic) continue;
        totals[{product_of(row.model_id), row.date}] += row.value.value_or(0.0);
    }
    std::vector<DailyStatRow> out;
    for (const auto& row : traffic_rows) {
        if (row.statistic.kind() != StatisticKind::Kind::traffic) continue;
        const double total = totals[{product_of(row.model_id), row.date}];
        std::optional<double> ratio;
        if (total > 0.0) ratio = row.value.value_or(0.0) / total;
        out.push_back({row.model_id, std::string(kModelEntity), StatisticKind{StatisticKind::Kind::traffic_ratio},
                       row.date, ratio});
    }
    return out;
}

} // namespace healthwatch
