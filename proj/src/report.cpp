#include "healthwatch/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "healthwatch/error.hpp"

namespace healthwatch::report {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 220.0;
constexpr double kLeft = 56.0;
constexpr double kRight = 12.0;
constexpr double kTop = 12.0;
constexpr double kBottom = 28.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string value_text(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string value_text(const std::optional<double>& v) { return v ? value_text(*v) : "n/a"; }

std::string trace_text(const std::optional<bool>& v) {
    if (!v) return "disabled";
    return *v ? "passed" : "failed";
}

} // namespace

void ImportanceConfig::set(const std::string& model, const std::string& entity, double score) {
    if (!std::isfinite(score) || score < 0.0)
        throw DataError("importance for " + model + "/" + entity + " must be finite and >= 0");
    scores_[model][entity] = score;
}

std::optional<double> ImportanceConfig::get(const std::string& model, const std::string& entity) const {
    auto m = scores_.find(model);
    if (m == scores_.end()) return std::nullopt;
    auto e = m->second.find(entity);
    if (e == m->second.end()) return std::nullopt;
    return e->second;
}

ImportanceConfig ImportanceConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read importance config " + path.string());
    ImportanceConfig c;
    try {
        const auto j = nlohmann::json::parse(in);
        if (!j.is_object()) throw DataError("importance config must be a JSON object");
        for (const auto& [model, entities] : j.items()) {
            if (!entities.is_object()) throw DataError("importance for model '" + model + "' must be an object");
            for (const auto& [entity, score] : entities.items()) {
                if (!score.is_number()) throw DataError("importance for " + model + "/" + entity + " must be a number");
                c.set(model, entity, score.get<double>());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("importance config " + path.string() + ": " + e.what());
    }
    return c;
}

std::vector<EntityImportance> rank_importance(const std::vector<std::string>& entities, const std::string& model,
                                              const ImportanceConfig& importance) {
    std::vector<EntityImportance> out;
    for (const auto& e : std::set<std::string>(entities.begin(), entities.end()))
        out.push_back({e, importance.get(model, e)});
    std::ranges::stable_sort(out, [](const EntityImportance& a, const EntityImportance& b) {
        if (a.score.has_value() != b.score.has_value()) return a.score.has_value();
        if (a.score && *a.score != *b.score) return *a.score > *b.score;
        return a.entity < b.entity;
    });
    return out;
}

ReportBundle build_bundle(const ModelAlert& alert, std::span<const DailyStatRow> stats,
                          std::span<const DecisionRecord> decisions, const ImportanceConfig& importance,
                          std::string generated_at) {
    ReportBundle b;
    b.alert = alert;
    b.generated_at = std::move(generated_at);
    const Day from = alert.start - std::chrono::days{kContextBefore};
    const Day to = alert.end + std::chrono::days{kContextAfter};
    const auto span_days = static_cast<std::size_t>(days_between(from, to) + 1);

    std::map<SeriesKey, std::vector<AnomalyInterval>> by_key;
    for (const auto& in : alert.intervals) by_key[in.key].push_back(in);

    std::vector<std::string> entities;
    for (const auto& [key, intervals] : by_key) {
        SeriesSlice s;
        s.key = key;
        s.start = from;
        s.values.assign(span_days, std::nullopt);
        s.intervals = intervals;
        bool from_stats = false;
        for (const auto& row : stats) {
            if (row.model_id != key.model_id || row.entity != key.entity || row.statistic != key.statistic) continue;
            if (row.date < from || row.date > to) continue;
            s.values[static_cast<std::size_t>(days_between(from, row.date))] = row.value;
            from_stats = true;
        }
        for (const auto& d : decisions) {
            if (d.key != key || d.date < from || d.date > to) continue;
            s.forecasts.push_back(d);
            auto& slot = s.values[static_cast<std::size_t>(days_between(from, d.date))];
            if (!from_stats) slot = d.observed;
        }
        std::ranges::sort(s.forecasts, {}, &DecisionRecord::date);
        entities.push_back(key.entity);
        b.slices.push_back(std::move(s));
    }
    b.importance = rank_importance(entities, alert.model_id, importance);

    std::map<Day, TrafficPoint> traffic;
    for (const auto& row : stats) {
        if (row.model_id != alert.model_id || row.entity != kModelEntity) continue;
        if (row.date < from || row.date > to) continue;
        auto& p = traffic[row.date];
        p.date = row.date;
        if (row.statistic.kind() == StatisticKind::Kind::traffic) p.traffic = row.value;
        if (row.statistic.kind() == StatisticKind::Kind::traffic_ratio) p.ratio = row.value;
    }
    for (auto& [day, p] : traffic) b.traffic.push_back(p);
    return b;
}

std::string plot_series_svg(const SeriesSlice& slice) {
    const std::size_t n = std::max<std::size_t>(slice.values.size(), 1);
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const double slot = plot_w / static_cast<double>(n);

    std::map<std::size_t, const DecisionRecord*> forecast_at;
    for (const auto& d : slice.forecasts) {
        const auto i = days_between(slice.start, d.date);
        if (i >= 0 && static_cast<std::size_t>(i) < slice.values.size()) forecast_at[static_cast<std::size_t>(i)] = &d;
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    auto extend = [&](double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    };
    for (const auto& v : slice.values)
        if (v) extend(*v);
    for (const auto& [i, d] : forecast_at) {
        extend(d->lower);
        extend(d->upper);
        extend(d->baseline);
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;
    double range = hi - lo;
    if (range == 0.0) range = std::max(std::abs(hi), 1.0);
    lo -= 0.05 * range;
    hi += 0.05 * range;

    auto x_of = [&](std::size_t i) { return kLeft + (static_cast<double>(i) + 0.5) * slot; };
    auto y_of = [&](double v) { return kTop + (hi - v) / (hi - lo) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
        << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\">\n";
    svg << "<rect class=\"frame\" x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(plot_w)
        << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"#999\"/>\n";

    std::set<std::size_t> flagged;
    for (const auto& in : slice.intervals) {
        for (Day d = in.start; d <= in.end; d += std::chrono::days{1}) {
            const auto i = days_between(slice.start, d);
            if (i >= 0 && static_cast<std::size_t>(i) < slice.values.size()) flagged.insert(static_cast<std::size_t>(i));
        }
    }
    for (std::size_t i : flagged) {
        svg << "<rect class=\"flag\" x=\"" << num(kLeft + static_cast<double>(i) * slot) << "\" y=\"" << num(kTop)
            << "\" width=\"" << num(slot) << "\" height=\"" << num(plot_h) << "\" fill=\"#f8d7da\"/>\n";
    }
    for (const auto& [i, d] : forecast_at) {
        const double top = y_of(d->upper);
        svg << "<rect class=\"band\" x=\"" << num(kLeft + static_cast<double>(i) * slot) << "\" y=\"" << num(top)
            << "\" width=\"" << num(slot) << "\" height=\"" << num(y_of(d->lower) - top)
            << "\" fill=\"#9ecae1\" fill-opacity=\"0.5\"/>\n";
    }
    if (!forecast_at.empty()) {
        svg << "<polyline class=\"baseline\" fill=\"none\" stroke=\"#3182bd\" stroke-dasharray=\"4 3\" points=\"";
        bool first = true;
        for (const auto& [i, d] : forecast_at) {
            svg << (first ? "" : " ") << num(x_of(i)) << ',' << num(y_of(d->baseline));
            first = false;
        }
        svg << "\"/>\n";
    }
    // Observed values, one polyline per run of present days.
    std::vector<std::string> runs;
    std::string current;
    for (std::size_t i = 0; i < slice.values.size(); ++i) {
        if (!slice.values[i]) {
            if (!current.empty()) runs.push_back(std::move(current));
            current.clear();
            continue;
        }
        if (!current.empty()) current += ' ';
        current += num(x_of(i)) + "," + num(y_of(*slice.values[i]));
    }
    if (!current.empty()) runs.push_back(std::move(current));
    for (const auto& r : runs)
        svg << "<polyline class=\"observed\" fill=\"none\" stroke=\"#222\" points=\"" << r << "\"/>\n";
    for (const auto& [i, d] : forecast_at) {
        if (!d->is_anomaly || !slice.values[i]) continue;
        svg << "<circle class=\"anomaly\" cx=\"" << num(x_of(i)) << "\" cy=\"" << num(y_of(*slice.values[i]))
            << "\" r=\"3.50\" fill=\"#d62728\"/>\n";
    }
    svg << "<text x=\"4.00\" y=\"" << num(kTop + 10) << "\" font-size=\"10\">" << value_text(hi) << "</text>\n";
    svg << "<text x=\"4.00\" y=\"" << num(kTop + plot_h) << "\" font-size=\"10\">" << value_text(lo) << "</text>\n";
    if (!slice.values.empty()) {
        svg << "<text x=\"" << num(kLeft) << "\" y=\"" << num(kHeight - 8) << "\" font-size=\"10\">"
            << format_iso_date(slice.start) << "</text>\n";
        svg << "<text x=\"" << num(kWidth - kRight) << "\" y=\"" << num(kHeight - 8)
            << "\" font-size=\"10\" text-anchor=\"end\">" << format_iso_date(slice.day_at(slice.values.size() - 1))
            << "</text>\n";
    }
    svg << "</svg>";
    return svg.str();
}

std::string html_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&#39;"; break;
        default: out += c;
        }
    }
    return out;
}

namespace {

std::string explain(const AnomalyInterval& in) {
    std::ostringstream s;
    s << html_escape(in.key.statistic.name()) << " of " << html_escape(in.key.entity) << " left its forecast band on "
      << in.duration << (in.duration == 1 ? " day" : " days") << " from " << format_iso_date(in.start) << " to "
      << format_iso_date(in.end) << ", reaching severity " << value_text(in.max_severity)
      << " (distance from the baseline in band widths). Pattern: " << to_string(in.pattern) << '.';
    return s.str();
}

} // namespace

std::string render_report(const ReportBundle& b) {
    const auto& a = b.alert;
    std::set<std::string> patterns;
    for (const auto& in : a.intervals) patterns.insert(std::string(to_string(in.pattern)));
    std::string pattern_text;
    for (const auto& p : patterns) pattern_text += (pattern_text.empty() ? "" : ", ") + p;

    std::ostringstream h;
    h << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Alert: "
      << html_escape(a.model_id) << "</title>\n"
      << "<style>body{font-family:sans-serif;margin:2em;max-width:60em}table{border-collapse:collapse}"
         "td,th{border:1px solid #ccc;padding:2px 8px;text-align:left}.unknown{color:#888}</style>\n"
      << "</head>\n<body>\n";

    h << "<section id=\"summary\">\n<h1>Model alert: " << html_escape(a.model_id) << "</h1>\n<table>\n"
      << "<tr><th>Model</th><td>" << html_escape(a.model_id) << "</td></tr>\n"
      << "<tr><th>Dates</th><td>" << format_iso_date(a.start) << " to " << format_iso_date(a.end) << "</td></tr>\n"
      << "<tr><th>Pattern</th><td>" << pattern_text << "</td></tr>\n"
      << "<tr><th>Abnormal series</th><td>" << a.intervals.size() << "</td></tr>\n"
      << "<tr><th>Grouping rule</th><td>" << to_string(a.rule) << "</td></tr>\n"
      << "<tr><th>Traffic ratio</th><td>" << value_text(a.traffic_ratio) << "</td></tr>\n"
      << "<tr><th>Generated</th><td>" << html_escape(b.generated_at) << "</td></tr>\n"
      << "</table>\n<h2>Why this alert fired</h2>\n<ul>\n";
    for (const auto& in : a.intervals) h << "<li>" << explain(in) << "</li>\n";
    h << "</ul>\n</section>\n";

    std::map<std::string, std::vector<const SeriesSlice*>> by_entity;
    for (const auto& s : b.slices) by_entity[s.key.entity].push_back(&s);
    for (const auto& [entity, slices] : by_entity) {
        h << "<section class=\"entity\">\n<h2>Entity: " << html_escape(entity) << "</h2>\n";
        for (const auto* s : slices) {
            h << "<h3>" << html_escape(s->key.statistic.name()) << "</h3>\n" << plot_series_svg(*s) << "\n";
        }
        h << "</section>\n";
    }

    h << "<section id=\"importance\">\n<h2>Feature importance</h2>\n<table>\n<tr><th>Entity</th><th>Importance</th></tr>\n";
    for (const auto& e : b.importance) {
        h << "<tr><td>" << html_escape(e.entity) << "</td>";
        if (e.score) h << "<td>" << value_text(*e.score) << "</td>";
        else h << "<td class=\"unknown\">unknown importance</td>";
        h << "</tr>\n";
    }
    h << "</table>\n</section>\n";

    h << "<section id=\"traffic\">\n<h2>Traffic</h2>\n";
    if (b.traffic.empty()) {
        h << "<p>No traffic statistics available.</p>\n";
    } else {
        h << "<table>\n<tr><th>Date</th><th>Traffic</th><th>Traffic ratio</th></tr>\n";
        for (const auto& p : b.traffic)
            h << "<tr><td>" << format_iso_date(p.date) << "</td><td>" << value_text(p.traffic) << "</td><td>"
              << value_text(p.ratio) << "</td></tr>\n";
        h << "</table>\n";
    }
    h << "</section>\n";

    h << "<section id=\"filters\">\n<h2>Filter trace</h2>\n<table>\n"
         "<tr><th>Series</th><th>Interval</th><th>Duration</th><th>Severity</th><th>Concurrency</th><th>MTR</th></tr>\n";
    for (const auto& in : a.intervals) {
        h << "<tr><td>" << html_escape(in.key.to_string()) << "</td><td>" << format_iso_date(in.start) << " to "
          << format_iso_date(in.end) << "</td><td>" << trace_text(in.trace.duration) << "</td><td>"
          << trace_text(in.trace.severity) << "</td><td>" << trace_text(in.trace.concurrency) << "</td><td>"
          << trace_text(in.trace.mtr) << "</td></tr>\n";
    }
    h << "</table>\n</section>\n</body>\n</html>\n";
    return h.str();
}

std::string report_file_name(const ModelAlert& alert) {
    std::string id = alert.model_id;
    for (char& c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    return id + "_" + format_iso_date(alert.start) + "_" + format_iso_date(alert.end) + ".html";
}

void write_report(const ReportBundle& bundle, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write report " + path.string());
    out << render_report(bundle);
    if (!out) throw DataError("failed writing report " + path.string());
}

} // namespace healthwatch::report
