#include "healthwatch/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

#include "healthwatch/error.hpp"
#include "regression_kernels.hpp"

namespace healthwatch {

void TrainConfig::validate() const {
    if (batch_size < 1) throw UsageError("batch size must be at least 1");
    if (epochs < 1) throw UsageError("epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
}

Hyperparams TrainConfig::hyperparams(int horizon) const {
    Hyperparams h;
    h.horizon = horizon;
    h.recent_omit = recent_omit;
    h.tau_lower = tau_lower;
    h.tau_upper = tau_upper;
    h.quantile_weight = quantile_weight;
    h.anomaly_threshold = anomaly_threshold;
    h.validate();
    return h;
}

TrainingSet collect_training_windows(std::span<const LabeledSeries> dataset, int horizon) {
    TrainingSet set;
    for (const auto& record : dataset) {
        const auto& s = record.series;
        for (std::size_t i = static_cast<std::size_t>(horizon); i < s.size(); ++i) {
            auto w = build_window_with_horizon(s, s.day_at(i), horizon);
            if (!w.valid()) continue;
            set.anomalous.push_back(record.is_labeled_anomalous(w.target));
            set.windows.push_back(std::move(w));
        }
    }
    return set;
}

double pinball_loss(double tau, double residual) { return std::max(tau * residual, (tau - 1.0) * residual); }

namespace {

double pinball_slope(double tau, double residual) { return residual > 0.0 ? tau : tau - 1.0; }

struct Sample {
    PreparedWindow prepared;
    bool anomalous = false;
};

std::vector<Sample> prepare_all(std::span<const DetectionWindow> windows, const std::vector<bool>& anomalous,
                                const Hyperparams& hyper) {
    if (windows.size() != anomalous.size()) throw UsageError("window and label counts differ");
    std::vector<Sample> out;
    out.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (!windows[i].valid()) throw UsageError("invalid window");
        if (windows[i].horizon() != hyper.horizon) throw UsageError("window horizon does not match model");
        out.push_back({prepare_window(windows[i], hyper), anomalous[i]});
    }
    return out;
}

/// Stage-one loss over samples[idx]; accumulates the gradient when `grad` is non-null.
ForecastLoss forecast_batch(const RegressionNet& net, const Hyperparams& hyper, const std::vector<Sample>& samples,
                            std::span<const std::size_t> idx, RegressionNet* grad) {
    std::size_t n = 0;
    for (std::size_t i : idx) n += samples[i].anomalous ? 0 : 1;
    ForecastLoss loss;
    loss.counted = n;
    if (n == 0) return loss;
    const double inv_n = 1.0 / static_cast<double>(n);
    const double lambda = hyper.quantile_weight;
    detail::RegressionTrace tr;
    for (std::size_t i : idx) {
        const Sample& s = samples[i];
        if (s.anomalous) continue;
        detail::regression_forward(net, s.prepared.input, s.prepared.iqr, tr);
        const double y = s.prepared.target;
        const double r = y - tr.baseline;
        const double rl = y - tr.lower;
        const double ru = y - tr.upper;
        loss.mse += r * r * inv_n;
        loss.lower += pinball_loss(hyper.tau_lower, rl) * inv_n;
        loss.upper += pinball_loss(hyper.tau_upper, ru) * inv_n;
        if (grad != nullptr) {
            const double g_base = -2.0 * r * inv_n;
            const double g_lower = -lambda * pinball_slope(hyper.tau_lower, rl) * inv_n;
            const double g_upper = -lambda * pinball_slope(hyper.tau_upper, ru) * inv_n;
            detail::regression_backward(net, s.prepared.input, s.prepared.iqr, tr, g_base, g_lower, g_upper, *grad);
        }
    }
    loss.total = loss.mse + lambda * (loss.lower + loss.upper);
    return loss;
}

struct ClassifierSample {
    std::array<double, 3> features{};
    double label = 0.0;
};

std::vector<ClassifierSample> classifier_samples(const RegressionNet& net, const std::vector<Sample>& samples) {
    std::vector<ClassifierSample> out;
    out.reserve(samples.size());
    detail::RegressionTrace tr;
    for (const auto& s : samples) {
        detail::regression_forward(net, s.prepared.input, s.prepared.iqr, tr);
        const double y = s.prepared.target;
        out.push_back({{y - tr.baseline, y - tr.lower, y - tr.upper}, s.anomalous ? 1.0 : 0.0});
    }
    return out;
}

/// Numerically stable binary cross-entropy on a logit.
double bce_with_logit(double z, double label) { return std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z))); }

double classifier_batch(const ClassifierNet& net, const std::vector<ClassifierSample>& samples,
                        std::span<const std::size_t> idx, ClassifierNet* grad) {
    if (idx.empty()) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(idx.size());
    double loss = 0.0;
    detail::ClassifierTrace tr;
    for (std::size_t i : idx) {
        const auto& s = samples[i];
        detail::classifier_forward(net, s.features, tr);
        loss += bce_with_logit(tr.logit, s.label) * inv_n;
        if (grad != nullptr) {
            detail::classifier_backward(net, s.features, tr, (nn::sigmoid(tr.logit) - s.label) * inv_n, *grad);
        }
    }
    return loss;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

/// Canonical sample order so training does not depend on input order.
std::vector<std::size_t> canonical_order(const TrainingSet& data) {
    auto order = iota_indices(data.size());
    std::ranges::sort(order, [&](std::size_t a, std::size_t b) {
        const auto& wa = data.windows[a];
        const auto& wb = data.windows[b];
        return std::tie(wa.key, wa.target) < std::tie(wb.key, wb.target);
    });
    return order;
}

TrainingSet reorder(const TrainingSet& data, std::span<const std::size_t> order) {
    TrainingSet out;
    out.windows.reserve(order.size());
    for (std::size_t i : order) {
        out.windows.push_back(data.windows[i]);
        out.anomalous.push_back(data.anomalous[i]);
    }
    return out;
}

template <class Net>
void zero_grad(Net& grad) {
    for (auto block : grad.parameter_blocks()) std::ranges::fill(block, 0.0);
}

constexpr std::uint64_t kShuffleStreamForecast = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kShuffleStreamClassifier = 0xC2B2AE3D27D4EB4FULL;

} // namespace

ForecastLoss forecast_loss_terms(std::span<const double> targets, std::span<const double> baseline,
                                 std::span<const double> lower, std::span<const double> upper,
                                 const std::vector<bool>& anomalous, double tau_lower, double tau_upper,
                                 double quantile_weight) {
    const std::size_t n = targets.size();
    if (baseline.size() != n || lower.size() != n || upper.size() != n || anomalous.size() != n)
        throw UsageError("loss inputs differ in length");
    ForecastLoss loss;
    for (std::size_t i = 0; i < n; ++i) loss.counted += anomalous[i] ? 0 : 1;
    if (loss.counted == 0) throw UsageError("batch has no non-anomalous points");
    const double inv_n = 1.0 / static_cast<double>(loss.counted);
    for (std::size_t i = 0; i < n; ++i) {
        if (anomalous[i]) continue;
        const double r = targets[i] - baseline[i];
        loss.mse += r * r * inv_n;
        loss.lower += pinball_loss(tau_lower, targets[i] - lower[i]) * inv_n;
        loss.upper += pinball_loss(tau_upper, targets[i] - upper[i]) * inv_n;
    }
    loss.total = loss.mse + quantile_weight * (loss.lower + loss.upper);
    return loss;
}

ForecastLossResult forecast_loss(const ForecastModel& model, std::span<const DetectionWindow> windows,
                                 const std::vector<bool>& anomalous) {
    const auto samples = prepare_all(windows, anomalous, model.hyper);
    const auto idx = iota_indices(samples.size());
    ForecastLossResult result{{}, RegressionNet::zeros_like(model.regression)};
    result.loss = forecast_batch(model.regression, model.hyper, samples, idx, &result.gradient);
    if (result.loss.counted == 0) throw UsageError("batch has no non-anomalous points");
    return result;
}

ClassifierLossResult classifier_loss(const ForecastModel& model, std::span<const DetectionWindow> windows,
                                     const std::vector<bool>& anomalous) {
    const auto samples = prepare_all(windows, anomalous, model.hyper);
    const auto features = classifier_samples(model.regression, samples);
    const auto idx = iota_indices(features.size());
    ClassifierLossResult result{0.0, ClassifierNet::zeros_like(model.classifier)};
    result.loss = classifier_batch(model.classifier, features, idx, &result.gradient);
    return result;
}

void train_forecaster(ForecastModel& model, const TrainingSet& data, const TrainConfig& config, TrainReport* report) {
    config.validate();
    const auto ordered = reorder(data, canonical_order(data));
    const auto samples = prepare_all(ordered.windows, ordered.anomalous, model.hyper);
    auto order = iota_indices(samples.size());
    const auto all = order;

    std::mt19937_64 rng(config.seed ^ kShuffleStreamForecast);
    nn::Adam adam(config.learning_rate);
    RegressionNet grad = RegressionNet::zeros_like(model.regression);
    auto grad_blocks = grad.parameter_blocks();
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::span<const std::size_t> idx(order.data() + start, std::min(batch, order.size() - start));
            zero_grad(grad);
            const auto loss = forecast_batch(model.regression, model.hyper, samples, idx, &grad);
            if (loss.counted == 0) continue;
            auto params = model.regression.parameter_blocks();
            adam.step(params, grad_blocks);
        }
        if (report != nullptr) {
            report->forecast_loss.push_back(forecast_batch(model.regression, model.hyper, samples, all, nullptr).total);
        }
    }
}

void train_classifier(ForecastModel& model, const TrainingSet& data, const TrainConfig& config, TrainReport* report) {
    config.validate();
    const auto ordered = reorder(data, canonical_order(data));
    const auto samples = prepare_all(ordered.windows, ordered.anomalous, model.hyper);
    const auto features = classifier_samples(model.regression, samples);
    auto order = iota_indices(features.size());
    const auto all = order;

    std::mt19937_64 rng(config.seed ^ kShuffleStreamClassifier);
    nn::Adam adam(config.learning_rate);
    ClassifierNet grad = ClassifierNet::zeros_like(model.classifier);
    auto grad_blocks = grad.parameter_blocks();
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::span<const std::size_t> idx(order.data() + start, std::min(batch, order.size() - start));
            zero_grad(grad);
            classifier_batch(model.classifier, features, idx, &grad);
            auto params = model.classifier.parameter_blocks();
            adam.step(params, grad_blocks);
        }
        if (report != nullptr) {
            report->classifier_loss.push_back(classifier_batch(model.classifier, features, all, nullptr));
        }
    }
}

ForecastModel train(const TrainingSet& data, int horizon, const TrainConfig& config, TrainReport* report) {
    config.validate();
    if (data.size() == 0) throw UsageError("training set is empty");
    const auto positives = static_cast<std::size_t>(std::ranges::count(data.anomalous, true));
    if (positives == data.size()) throw UsageError("training set has no non-anomalous points");
    if (positives == 0) throw UsageError("training set has no anomalous points; the classifier cannot be fit");
    ForecastModel model = ForecastModel::initialize(config.hyperparams(horizon), config.seed);
    train_forecaster(model, data, config, report);
    train_classifier(model, data, config, report);
    return model;
}

namespace {

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
}

} // namespace

GradientCheckReport gradient_check(const ForecastModel& model, std::span<const DetectionWindow> windows,
                                   const std::vector<bool>& anomalous, double step) {
    GradientCheckReport report;
    const auto samples = prepare_all(windows, anomalous, model.hyper);
    const auto idx = iota_indices(samples.size());

    ForecastModel probe = model;
    RegressionNet analytic_reg = RegressionNet::zeros_like(model.regression);
    if (forecast_batch(model.regression, model.hyper, samples, idx, &analytic_reg).counted == 0)
        throw UsageError("gradient check batch has no non-anomalous points");
    auto params = probe.regression.parameter_blocks();
    auto grads = analytic_reg.parameter_blocks();
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            const double saved = params[b][i];
            params[b][i] = saved + step;
            const double up = forecast_batch(probe.regression, probe.hyper, samples, idx, nullptr).total;
            params[b][i] = saved - step;
            const double down = forecast_batch(probe.regression, probe.hyper, samples, idx, nullptr).total;
            params[b][i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            report.forecast_max_rel_error =
                std::max(report.forecast_max_rel_error, relative_error(grads[b][i], numeric));
            ++report.parameters_checked;
        }
    }

    const auto features = classifier_samples(model.regression, samples);
    ClassifierNet analytic_cls = ClassifierNet::zeros_like(model.classifier);
    classifier_batch(model.classifier, features, idx, &analytic_cls);
    auto cparams = probe.classifier.parameter_blocks();
    auto cgrads = analytic_cls.parameter_blocks();
    for (std::size_t b = 0; b < cparams.size(); ++b) {
        for (std::size_t i = 0; i < cparams[b].size(); ++i) {
            const double saved = cparams[b][i];
            cparams[b][i] = saved + step;
            const double up = classifier_batch(probe.classifier, features, idx, nullptr);
            cparams[b][i] = saved - step;
            const double down = classifier_batch(probe.classifier, features, idx, nullptr);
            cparams[b][i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            report.classifier_max_rel_error =
                std::max(report.classifier_max_rel_error, relative_error(cgrads[b][i], numeric));
            ++report.parameters_checked;
        }
    }
    return report;
}

} // namespace healthwatch
