#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "healthwatch/detector.hpp"

namespace healthwatch {

struct TrainConfig {
    int batch_size = 256;
    int epochs = 100;
    double learning_rate = 1e-3;
    double quantile_weight = 1.0;
    double tau_lower = 0.025;
    double tau_upper = 0.975;
    int recent_omit = 3;
    double anomaly_threshold = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
    Hyperparams hyperparams(int horizon) const;
};

/// Valid windows with per-point anomaly labels.
struct TrainingSet {
    std::vector<DetectionWindow> windows;
    std::vector<bool> anomalous;

    std::size_t size() const { return windows.size(); }
};

/// Every valid window with exactly `horizon` days of history across the dataset,
/// labeled anomalous when the target day lies in a label interval.
TrainingSet collect_training_windows(std::span<const LabeledSeries> dataset, int horizon);

/// Pinball loss max(tau*r, (tau-1)*r) for residual r = target - prediction.
double pinball_loss(double tau, double residual);

struct ForecastLoss {
    double mse = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double total = 0.0;
    std::size_t counted = 0;  ///< non-anomalous points averaged over
};

/// L_MSE + lambda * (L_l + L_u) over the non-anomalous points, all values in normalized space.
/// Throws UsageError when no point is non-anomalous.
ForecastLoss forecast_loss_terms(std::span<const double> targets, std::span<const double> baseline,
                                 std::span<const double> lower, std::span<const double> upper,
                                 const std::vector<bool>& anomalous, double tau_lower, double tau_upper,
                                 double quantile_weight);

struct ForecastLossResult {
    ForecastLoss loss;
    RegressionNet gradient;
};

/// Stage-one loss on a batch and its gradient for every regression weight (trunk, heads, irregularity layer).
ForecastLossResult forecast_loss(const ForecastModel& model, std::span<const DetectionWindow> windows,
                                 const std::vector<bool>& anomalous);

struct ClassifierLossResult {
    double loss = 0.0;
    ClassifierNet gradient;
};

/// Mean binary cross-entropy of the classifier on the stage-one deviations; gradient over classifier weights.
ClassifierLossResult classifier_loss(const ForecastModel& model, std::span<const DetectionWindow> windows,
                                     const std::vector<bool>& anomalous);

struct TrainReport {
    std::vector<double> forecast_loss;    ///< full-data stage-one loss after each epoch
    std::vector<double> classifier_loss;  ///< full-data cross-entropy after each epoch
};

/// Phase one: fits trunk, heads and irregularity layer on the anomaly-masked forecast loss.
void train_forecaster(ForecastModel& model, const TrainingSet& data, const TrainConfig& config,
                      TrainReport* report = nullptr);

/// Phase two: fits the classifier with phase-one weights frozen.
void train_classifier(ForecastModel& model, const TrainingSet& data, const TrainConfig& config,
                      TrainReport* report = nullptr);

/// Both phases. Deterministic in `config.seed` and independent of the order of `data`.
/// Throws UsageError for empty data, data without normal points, or data without anomalous points.
ForecastModel train(const TrainingSet& data, int horizon, const TrainConfig& config, TrainReport* report = nullptr);

struct GradientCheckReport {
    double forecast_max_rel_error = 0.0;
    double classifier_max_rel_error = 0.0;
    std::size_t parameters_checked = 0;

    double max_rel_error() const { return std::max(forecast_max_rel_error, classifier_max_rel_error); }
};

/// Compares analytic gradients of both losses with central finite differences on every weight.
/// Relative error is |a - n| / max(|a| + |n|, 1e-6).
GradientCheckReport gradient_check(const ForecastModel& model, std::span<const DetectionWindow> windows,
                                   const std::vector<bool>& anomalous, double step = 1e-5);

} // namespace healthwatch
