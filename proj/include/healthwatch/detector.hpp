#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "healthwatch/nn.hpp"
#include "healthwatch/series.hpp"

namespace healthwatch {

inline constexpr double kSigmaFloor = 1e-8;
inline constexpr double kSeverityFloor = 1e-8;

/// Window mean and population standard deviation (floored at kSigmaFloor).
struct NormParams {
    double mu = 0.0;
    double sigma = 1.0;
};

struct NormalizedWindow {
    std::vector<double> values;
    NormParams norm;
};

NormalizedWindow layer_normalize(std::span<const double> history);

inline double normalize(double x, NormParams norm) { return (x - norm.mu) / norm.sigma; }
inline double inverse_normalize(double y, NormParams norm) { return y * norm.sigma + norm.mu; }

/// Drops the most recent `k` entries. Throws UsageError unless 0 <= k < size.
std::vector<double> recent_omit(std::span<const double> normalized_history, int k);

/// IQR (nearest-rank 25%/75%) of the week-over-week differences h[i] - h[i+7]; needs >= 8 entries.
double week_over_week_iqr(std::span<const double> normalized_history);

/// Irregularity multiplier 2*sigmoid(w*IQR + b), in (0, 2); equals 1 at w = b = 0.
double irregularity_score(std::span<const double> normalized_history, double weight, double bias);

struct Hyperparams {
    int horizon = kLongHorizon;
    int recent_omit = 3;
    double tau_lower = 0.025;
    double tau_upper = 0.975;
    double quantile_weight = 1.0;  ///< lambda in the combined forecast loss
    double anomaly_threshold = 0.2;

    std::size_t regression_inputs() const { return static_cast<std::size_t>(horizon - recent_omit) + 7; }
    void validate() const;
    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

inline constexpr std::array<std::size_t, 3> kTrunkSizes{18, 9, 8};
inline constexpr std::array<std::size_t, 2> kHeadSizes{4, 1};
inline constexpr std::array<std::size_t, 3> kClassifierSizes{8, 4, 1};
inline constexpr std::size_t kClassifierInputs = 3;

enum Head : std::size_t { kBaselineHead = 0, kLowerHead = 1, kUpperHead = 2 };

/// Stage one: shared trunk, three two-layer heads, and the scalar irregularity layer.
struct RegressionNet {
    std::array<nn::DenseLayer, 3> trunk;
    std::array<std::array<nn::DenseLayer, 2>, 3> heads;
    double irregularity_weight = 0.0;
    double irregularity_bias = 0.0;

    static RegressionNet zeros_like(const RegressionNet& other);
    std::vector<std::span<double>> parameter_blocks();
    friend bool operator==(const RegressionNet&, const RegressionNet&) = default;
};

/// Stage two: deviations (3) -> 8 -> 4 -> 1 logit.
struct ClassifierNet {
    std::array<nn::DenseLayer, 3> layers;

    static ClassifierNet zeros_like(const ClassifierNet& other);
    std::vector<std::span<double>> parameter_blocks();
    friend bool operator==(const ClassifierNet&, const ClassifierNet&) = default;
};

struct ForecastModel {
    Hyperparams hyper;
    RegressionNet regression;
    ClassifierNet classifier;

    /// Freshly initialized weights (He/Glorot uniform, zero irregularity layer) from `seed`.
    static ForecastModel initialize(const Hyperparams& hyper, std::uint64_t seed);
    /// Throws ModelFormatError when layer shapes disagree with the hyperparameters.
    void validate() const;
    friend bool operator==(const ForecastModel&, const ForecastModel&) = default;
};

/// Stage-one output. Raw-space values plus the same quantities in the window's normalized space.
struct Forecast {
    double baseline = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double irregularity = 1.0;
    NormParams norm;
    double norm_baseline = 0.0;
    double norm_lower = 0.0;
    double norm_upper = 0.0;
};

/// Inputs derived from one window, independent of the weights: trunk input, IQR, normalized target.
struct PreparedWindow {
    std::vector<double> input;
    double iqr = 0.0;
    double target = 0.0;
    NormParams norm;
};

PreparedWindow prepare_window(const DetectionWindow& window, const Hyperparams& hyper);

/// Normalized-space stage-one outputs after amplification and ordering.
struct HeadOutputs {
    double baseline = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double irregularity = 1.0;
};

HeadOutputs regression_forward(const RegressionNet& net, std::span<const double> input, double iqr);

/// Throws UsageError("invalid window") unless window.valid() and its horizon matches the model.
Forecast forecast_forward(const DetectionWindow& window, const ForecastModel& model);

/// [n(T) - n(T^), n(T) - n(T^_l), n(T) - n(T^_u)] in the window's normalized space.
std::array<double, 3> deviation_features(const Forecast& forecast, double observed);

double classifier_logit(const ClassifierNet& net, std::span<const double, 3> features);

/// Anomaly probability for `observed` given the forecast made for the same window.
double classifier_forward(const Forecast& forecast, double observed, const ForecastModel& model);

/// |T^ - T| / |T^_u - T^_l|, denominator floored at kSeverityFloor.
double severity(double baseline, double lower, double upper, double observed);

struct PointDecision {
    Forecast forecast;
    double observed = 0.0;
    double anomaly_probability = 0.0;
    bool out_of_boundary = false;
    bool is_anomaly = false;
    double severity = 0.0;
};

struct DetectOptions {
    /// When false the decision is the boundary check alone (forecast-only ablation).
    bool use_classifier = true;
    /// Overrides the model's anomaly threshold when set.
    std::optional<double> threshold;
};

/// nullopt for invalid windows.
std::optional<PointDecision> detect_point(const DetectionWindow& window, const ForecastModel& model,
                                          const DetectOptions& options = {});

/// Models keyed by horizon; windows are routed to the model matching their horizon.
class Detector {
public:
    Detector() = default;
    explicit Detector(std::vector<ForecastModel> models);

    void add(ForecastModel model);
    const ForecastModel* model_for(int horizon) const;
    std::vector<ForecastModel> models() const;
    bool empty() const { return models_.empty(); }

    /// nullopt when the window is invalid or no model serves its horizon.
    std::optional<PointDecision> detect(const DetectionWindow& window, const DetectOptions& options = {}) const;

private:
    std::map<int, ForecastModel> models_;
};

/// Batch detection over prepared windows, fanned out over `workers` OpenMP threads.
std::vector<std::optional<PointDecision>> detect_windows(std::span<const DetectionWindow> windows,
                                                         const Detector& detector, const DetectOptions& options = {},
                                                         int workers = 0);

/// Single-threaded reference for detect_windows.
std::vector<std::optional<PointDecision>> detect_windows_serial(std::span<const DetectionWindow> windows,
                                                                const Detector& detector,
                                                                const DetectOptions& options = {});

} // namespace healthwatch
