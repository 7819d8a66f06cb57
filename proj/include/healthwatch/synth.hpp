#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "healthwatch/postprocess.hpp"
#include "healthwatch/series.hpp"

namespace healthwatch::synth {

enum class Shape { sine, square, constant };
std::string_view to_string(Shape shape);
Shape parse_shape(std::string_view text);

/// Anomaly patterns the generator can inject; spikes last at most kSpikeMaxDays.
enum class InjectPattern { spike, level_shift };
std::string_view to_string(InjectPattern pattern);
InjectPattern parse_inject_pattern(std::string_view text);

/// Fewest clean days that must precede an injected anomaly.
inline constexpr int kCleanLeadDays = 28;

struct AnomalySpec {
    InjectPattern pattern = InjectPattern::spike;
    double intensity = 5.0;  ///< multiples of noise_std
    int duration = 2;
    /// First anomalous day index. Chosen from the seed when unset: spikes land uniformly in
    /// [28, length - duration - 1], level shifts start at length - duration.
    std::optional<int> location;

    void validate() const;
};

struct SynthConfig {
    Shape shape = Shape::sine;
    int length = 84;
    int period = 7;
    double amplitude = 1.0;
    double base_level = 10.0;
    double noise_std = 0.1;
    AnomalySpec anomaly;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Noiseless shape value at day index t.
double shape_value(const SynthConfig& config, int t);

/// Start date of generated series before the per-series offset.
Day default_start_date();

/// base + shape + N(0, noise_std^2), deterministic in config.seed. Start date is
/// default_start_date() shifted by 0..6 days drawn from the seed.
UnivariateSeries generate_base_series(const SynthConfig& config);

/// Added magnitude: intensity * noise_std, or intensity * 0.1 * amplitude when noise_std is 0.
double injection_magnitude(const SynthConfig& config);

struct Injected {
    UnivariateSeries series;
    LabelInterval label;
};

/// Adds the anomaly at spec.location (required). Spikes cover `duration` days then revert;
/// level shifts offset every day from the location to the end of the series.
/// Throws UsageError when the location leaves fewer than 28 clean leading days or the
/// anomaly does not fit in the series.
Injected inject_anomaly(const UnivariateSeries& series, const AnomalySpec& spec, double magnitude);

/// Anomaly location drawn from the seed as documented on AnomalySpec.
int choose_location(const SynthConfig& config);

struct SynthSeries {
    LabeledSeries record;
    SynthConfig config;
};

/// Base series plus one injected anomaly.
SynthSeries generate_series(const SynthConfig& config, std::size_t index);

/// shapes x noise levels x intensities x durations, n series per cell.
struct Grid {
    std::vector<Shape> shapes{Shape::sine, Shape::square, Shape::constant};
    std::vector<double> noise_std{0.1};
    std::vector<double> intensity{5.0};
    std::vector<int> duration{2};
    /// Unset: durations up to 3 days are spikes, longer ones level shifts.
    std::optional<InjectPattern> pattern;
    int length = 84;
    int period = 7;
    double amplitude = 1.0;
    double base_level = 10.0;

    std::size_t cells() const { return shapes.size() * noise_std.size() * intensity.size() * duration.size(); }
    void validate() const;
    /// JSON object with any of: shapes, noise_std, intensity, duration (arrays), pattern
    /// ("spike" | "level_shift" | "auto"), length, period, amplitude, base_level.
    static Grid from_json(const nlohmann::json& j);
    static Grid load(const std::filesystem::path& path);
};

InjectPattern default_pattern(int duration);

/// Series id of the index-th generated series ("synth-000123").
std::string series_model_id(std::size_t index);

/// Per-series seed derived from the run seed and the series index.
std::uint64_t series_seed(std::uint64_t seed, std::size_t index);

/// n series per grid cell, cells enumerated shape-major. Deterministic in seed.
std::vector<SynthSeries> generate_dataset(const Grid& grid, std::size_t n_per_cell, std::uint64_t seed);

nlohmann::json manifest_entry(const SynthSeries& s);

/// Writes <dir>/dataset.jsonl (labeled dataset format) and <dir>/manifest.jsonl
/// (series id -> generator config), replacing existing files.
void write_output(const std::filesystem::path& dir, const std::vector<SynthSeries>& dataset);

/// Percentage of labeled days among all days.
double abnormal_day_percent(std::span<const LabeledSeries> dataset);

} // namespace healthwatch::synth
