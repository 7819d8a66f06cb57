#include "healthwatch/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "healthwatch/error.hpp"
#include "healthwatch/io.hpp"

namespace healthwatch::synth {

namespace {

constexpr std::uint64_t kOffsetStream = 0x6a09e667f3bcc909ULL;
constexpr std::uint64_t kLocationStream = 0xbb67ae8584caa73bULL;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::string_view to_string(Shape shape) {
    switch (shape) {
    case Shape::sine: return "sine";
    case Shape::square: return "square";
    case Shape::constant: return "constant";
    }
    return "constant";
}

Shape parse_shape(std::string_view text) {
    if (text == "sine") return Shape::sine;
    if (text == "square") return Shape::square;
    if (text == "constant") return Shape::constant;
    throw UsageError("unknown shape '" + std::string(text) + "' (sine, square, constant)");
}

std::string_view to_string(InjectPattern pattern) {
    return pattern == InjectPattern::spike ? "spike" : "level_shift";
}

InjectPattern parse_inject_pattern(std::string_view text) {
    if (text == "spike") return InjectPattern::spike;
    if (text == "level_shift") return InjectPattern::level_shift;
    throw UsageError("unknown anomaly pattern '" + std::string(text) + "' (spike, level_shift)");
}

void AnomalySpec::validate() const {
    if (duration < 1) throw UsageError("anomaly duration must be at least 1 day");
    if (pattern == InjectPattern::spike && duration > kSpikeMaxDays)
        throw UsageError("spike duration must be at most 3 days");
    if (!std::isfinite(intensity)) throw UsageError("anomaly intensity must be finite");
}

void SynthConfig::validate() const {
    if (length < 42) throw UsageError("series length must be at least 42 days");
    if (shape != Shape::constant && period < 2) throw UsageError("period must be at least 2 days");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw UsageError("noise_std must be finite and >= 0");
    if (!std::isfinite(amplitude) || !std::isfinite(base_level)) throw UsageError("amplitude and base level must be finite");
    anomaly.validate();
}

double shape_value(const SynthConfig& config, int t) {
    switch (config.shape) {
    case Shape::sine:
        return config.base_level + config.amplitude * std::sin(2.0 * std::numbers::pi * t / config.period);
    case Shape::square: {
        // +A over the first half of each period, -A over the second; avoids sign(0) at phase 0.
        const int phase = t % config.period;
        return config.base_level + (2 * phase < config.period ? config.amplitude : -config.amplitude);
    }
    case Shape::constant: return config.base_level;
    }
    return config.base_level;
}

Day default_start_date() { return Day{std::chrono::year{2024} / 1 / 1}; }

UnivariateSeries generate_base_series(const SynthConfig& config) {
    config.validate();
    std::mt19937_64 offset_rng(config.seed ^ kOffsetStream);
    const int offset = std::uniform_int_distribution<int>(0, 6)(offset_rng);

    UnivariateSeries s;
    s.key = {"synth", "series", StatisticKind{StatisticKind::Kind::mean}};
    s.start = default_start_date() + std::chrono::days{offset};
    s.values.reserve(static_cast<std::size_t>(config.length));
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int t = 0; t < config.length; ++t) {
        const double eps = config.noise_std > 0.0 ? config.noise_std * noise(rng) : 0.0;
        s.values.emplace_back(shape_value(config, t) + eps);
    }
    return s;
}

double injection_magnitude(const SynthConfig& config) {
    const double unit = config.noise_std > 0.0 ? config.noise_std : 0.1 * std::abs(config.amplitude);
    return config.anomaly.intensity * unit;
}

Injected inject_anomaly(const UnivariateSeries& series, const AnomalySpec& spec, double magnitude) {
    spec.validate();
    if (!spec.location) throw UsageError("anomaly location is required");
    const int loc = *spec.location;
    const int n = static_cast<int>(series.size());
    if (loc < kCleanLeadDays)
        throw UsageError("anomaly at day index " + std::to_string(loc) + " leaves fewer than 28 clean leading days");
    if (loc + spec.duration > n)
        throw UsageError("series of " + std::to_string(n) + " days is too short for the anomaly");

    Injected out{series, {}};
    const int last = spec.pattern == InjectPattern::spike ? loc + spec.duration - 1 : n - 1;
    for (int t = loc; t <= last; ++t) {
        auto& v = out.series.values[static_cast<std::size_t>(t)];
        if (v) *v += magnitude;
    }
    out.label = {series.day_at(static_cast<std::size_t>(loc)), series.day_at(static_cast<std::size_t>(last))};
    return out;
}

int choose_location(const SynthConfig& config) {
    const auto& a = config.anomaly;
    if (a.pattern == InjectPattern::level_shift) {
        const int loc = config.length - a.duration;
        if (loc < kCleanLeadDays) throw UsageError("level shift too long for the series length");
        return loc;
    }
    const int hi = config.length - a.duration - 1;
    if (hi < kCleanLeadDays) throw UsageError("series too short for a spike after 28 clean days");
    std::mt19937_64 rng(config.seed ^ kLocationStream);
    return std::uniform_int_distribution<int>(kCleanLeadDays, hi)(rng);
}

std::string series_model_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth-%06zu", index);
    return buf;
}

std::uint64_t series_seed(std::uint64_t seed, std::size_t index) {
    return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(index));
}

SynthSeries generate_series(const SynthConfig& config, std::size_t index) {
    SynthConfig c = config;
    if (!c.anomaly.location) c.anomaly.location = choose_location(c);
    auto base = generate_base_series(c);
    base.key.model_id = series_model_id(index);
    auto injected = inject_anomaly(base, c.anomaly, injection_magnitude(c));
    SynthSeries out;
    out.record.series = std::move(injected.series);
    out.record.labels.push_back(injected.label);
    out.config = c;
    return out;
}

InjectPattern default_pattern(int duration) {
    return duration <= kSpikeMaxDays ? InjectPattern::spike : InjectPattern::level_shift;
}

void Grid::validate() const {
    if (cells() == 0) throw UsageError("synthetic grid has no cells");
    SynthConfig probe;
    probe.length = length;
    probe.period = period;
    probe.amplitude = amplitude;
    probe.base_level = base_level;
    for (double s : noise_std) {
        probe.noise_std = s;
        probe.validate();
    }
    for (int d : duration) {
        AnomalySpec a;
        a.duration = d;
        a.pattern = pattern.value_or(default_pattern(d));
        a.validate();
    }
}

Grid Grid::from_json(const nlohmann::json& j) {
    Grid g;
    try {
        if (j.contains("shapes")) {
            g.shapes.clear();
            for (const auto& s : j.at("shapes")) g.shapes.push_back(parse_shape(s.get<std::string>()));
        }
        if (j.contains("noise_std")) g.noise_std = j.at("noise_std").get<std::vector<double>>();
        if (j.contains("intensity")) g.intensity = j.at("intensity").get<std::vector<double>>();
        if (j.contains("duration")) g.duration = j.at("duration").get<std::vector<int>>();
        if (j.contains("pattern")) {
            const auto p = j.at("pattern").get<std::string>();
            if (p != "auto") g.pattern = parse_inject_pattern(p);
        }
        g.length = j.value("length", g.length);
        g.period = j.value("period", g.period);
        g.amplitude = j.value("amplitude", g.amplitude);
        g.base_level = j.value("base_level", g.base_level);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("synthetic grid: ") + e.what());
    }
    g.validate();
    return g;
}

Grid Grid::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read grid file " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("grid file " + path.string() + ": " + e.what());
    }
}

std::vector<SynthSeries> generate_dataset(const Grid& grid, std::size_t n_per_cell, std::uint64_t seed) {
    grid.validate();
    std::vector<SynthConfig> configs;
    configs.reserve(grid.cells() * n_per_cell);
    for (Shape shape : grid.shapes)
        for (double noise : grid.noise_std)
            for (double intensity : grid.intensity)
                for (int duration : grid.duration)
                    for (std::size_t k = 0; k < n_per_cell; ++k) {
                        SynthConfig c;
                        c.shape = shape;
                        c.length = grid.length;
                        c.period = grid.period;
                        c.amplitude = grid.amplitude;
                        c.base_level = grid.base_level;
                        c.noise_std = noise;
                        c.anomaly.pattern = grid.pattern.value_or(default_pattern(duration));
                        c.anomaly.intensity = intensity;
                        c.anomaly.duration = duration;
                        c.seed = series_seed(seed, configs.size());
                        configs.push_back(c);
                    }
    std::vector<SynthSeries> out(configs.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < configs.size(); ++i) out[i] = generate_series(configs[i], i);
    return out;
}

nlohmann::json manifest_entry(const SynthSeries& s) {
    const auto& c = s.config;
    return {{"id", s.record.series.key.model_id},
            {"shape", to_string(c.shape)},
            {"length", c.length},
            {"period", c.period},
            {"amplitude", c.amplitude},
            {"base_level", c.base_level},
            {"noise_std", c.noise_std},
            {"seed", c.seed},
            {"anomaly",
             {{"pattern", to_string(c.anomaly.pattern)},
              {"intensity", c.anomaly.intensity},
              {"duration", c.anomaly.duration},
              {"location", c.anomaly.location.value_or(-1)}}}};
}

void write_output(const std::filesystem::path& dir, const std::vector<SynthSeries>& dataset) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
    std::vector<LabeledSeries> records;
    records.reserve(dataset.size());
    for (const auto& s : dataset) records.push_back(s.record);
    io::write_dataset(dir / "dataset.jsonl", records);
    std::ofstream manifest(dir / "manifest.jsonl", std::ios::trunc);
    if (!manifest) throw DataError("cannot write " + (dir / "manifest.jsonl").string());
    for (const auto& s : dataset) manifest << manifest_entry(s).dump() << '\n';
}

double abnormal_day_percent(std::span<const LabeledSeries> dataset) {
    std::int64_t labeled = 0;
    std::int64_t total = 0;
    for (const auto& r : dataset) {
        total += static_cast<std::int64_t>(r.series.size());
        for (const auto& l : r.labels) labeled += l.length();
    }
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(labeled) / static_cast<double>(total);
}

} // namespace healthwatch::synth
