#include "healthwatch/detector.hpp"

#include <algorithm>
#include <cmath>

#include "healthwatch/error.hpp"
#include "healthwatch/health_stats.hpp"
#include "parallel.hpp"
#include "regression_kernels.hpp"

namespace healthwatch {

NormalizedWindow layer_normalize(std::span<const double> history) {
    NormalizedWindow out;
    if (history.empty()) return out;
    const double n = static_cast<double>(history.size());
    double sum = 0.0;
    for (double x : history) sum += x;
    const double mu = sum / n;
    double ss = 0.0;
    for (double x : history) ss += (x - mu) * (x - mu);
    const double sigma = std::max(std::sqrt(ss / n), kSigmaFloor);
    out.norm = {mu, sigma};
    out.values.reserve(history.size());
    for (double x : history) out.values.push_back((x - mu) / sigma);
    return out;
}

std::vector<double> recent_omit(std::span<const double> normalized_history, int k) {
    if (k < 0 || static_cast<std::size_t>(k) >= normalized_history.size()) {
        throw UsageError("recent-omit K=" + std::to_string(k) + " must lie in [0, " +
                         std::to_string(normalized_history.size()) + ")");
    }
    return {normalized_history.begin(), normalized_history.end() - k};
}

double week_over_week_iqr(std::span<const double> normalized_history) {
    if (normalized_history.size() < 8) throw UsageError("week-over-week IQR needs at least 8 days of history");
    std::vector<double> deltas;
    deltas.reserve(normalized_history.size() - 7);
    for (std::size_t i = 0; i + 7 < normalized_history.size(); ++i) {
        deltas.push_back(normalized_history[i] - normalized_history[i + 7]);
    }
    std::ranges::sort(deltas);
    return nearest_rank(deltas, 75) - nearest_rank(deltas, 25);
}

double irregularity_score(std::span<const double> normalized_history, double weight, double bias) {
    return 2.0 * nn::sigmoid(weight * week_over_week_iqr(normalized_history) + bias);
}

void Hyperparams::validate() const {
    if (horizon < 8) throw UsageError("horizon must be at least 8 days");
    if (recent_omit < 0 || recent_omit >= horizon) throw UsageError("recent-omit K must lie in [0, H)");
    if (!(0.0 < tau_lower && tau_lower < tau_upper && tau_upper < 1.0))
        throw UsageError("quantiles must satisfy 0 < tau_l < tau_u < 1");
    if (!(0.0 < anomaly_threshold && anomaly_threshold < 1.0))
        throw UsageError("anomaly threshold must lie in (0, 1)");
    if (!(quantile_weight >= 0.0)) throw UsageError("quantile weight must be non-negative");
}

namespace {

std::array<nn::DenseLayer, 3> make_trunk(std::size_t inputs) {
    return {nn::DenseLayer(inputs, kTrunkSizes[0]), nn::DenseLayer(kTrunkSizes[0], kTrunkSizes[1]),
            nn::DenseLayer(kTrunkSizes[1], kTrunkSizes[2])};
}

std::array<nn::DenseLayer, 2> make_head() {
    return {nn::DenseLayer(kTrunkSizes[2], kHeadSizes[0]), nn::DenseLayer(kHeadSizes[0], kHeadSizes[1])};
}

std::array<nn::DenseLayer, 3> make_classifier() {
    return {nn::DenseLayer(kClassifierInputs, kClassifierSizes[0]),
            nn::DenseLayer(kClassifierSizes[0], kClassifierSizes[1]),
            nn::DenseLayer(kClassifierSizes[1], kClassifierSizes[2])};
}

bool same_shape(const nn::DenseLayer& layer, std::size_t in, std::size_t out) {
    return layer.inputs == in && layer.outputs == out && layer.weight.size() == in * out && layer.bias.size() == out;
}

nn::DenseLayer zeros_like(const nn::DenseLayer& layer) { return nn::DenseLayer(layer.inputs, layer.outputs); }

} // namespace

RegressionNet RegressionNet::zeros_like(const RegressionNet& other) {
    RegressionNet g;
    for (std::size_t i = 0; i < 3; ++i) g.trunk[i] = healthwatch::zeros_like(other.trunk[i]);
    for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t i = 0; i < 2; ++i) g.heads[h][i] = healthwatch::zeros_like(other.heads[h][i]);
    return g;
}

std::vector<std::span<double>> RegressionNet::parameter_blocks() {
    std::vector<std::span<double>> blocks;
    for (auto& layer : trunk) {
        blocks.emplace_back(layer.weight);
        blocks.emplace_back(layer.bias);
    }
    for (auto& head : heads) {
        for (auto& layer : head) {
            blocks.emplace_back(layer.weight);
            blocks.emplace_back(layer.bias);
        }
    }
    blocks.emplace_back(&irregularity_weight, 1);
    blocks.emplace_back(&irregularity_bias, 1);
    return blocks;
}

ClassifierNet ClassifierNet::zeros_like(const ClassifierNet& other) {
    ClassifierNet g;
    for (std::size_t i = 0; i < 3; ++i) g.layers[i] = healthwatch::zeros_like(other.layers[i]);
    return g;
}

std::vector<std::span<double>> ClassifierNet::parameter_blocks() {
    std::vector<std::span<double>> blocks;
    for (auto& layer : layers) {
        blocks.emplace_back(layer.weight);
        blocks.emplace_back(layer.bias);
    }
    return blocks;
}

ForecastModel ForecastModel::initialize(const Hyperparams& hyper, std::uint64_t seed) {
    hyper.validate();
    std::mt19937_64 rng(seed);
    ForecastModel model;
    model.hyper = hyper;
    model.regression.trunk = make_trunk(hyper.regression_inputs());
    for (auto& layer : model.regression.trunk) nn::initialize(layer, nn::Init::he_uniform, rng);
    for (auto& head : model.regression.heads) {
        head = make_head();
        nn::initialize(head[0], nn::Init::he_uniform, rng);
        nn::initialize(head[1], nn::Init::glorot_uniform, rng);
    }
    // Start the boundary heads roughly two standard deviations either side of the baseline.
    model.regression.heads[kLowerHead][1].bias[0] = -2.0;
    model.regression.heads[kUpperHead][1].bias[0] = 2.0;
    model.classifier.layers = make_classifier();
    nn::initialize(model.classifier.layers[0], nn::Init::he_uniform, rng);
    nn::initialize(model.classifier.layers[1], nn::Init::he_uniform, rng);
    nn::initialize(model.classifier.layers[2], nn::Init::glorot_uniform, rng);
    return model;
}

void ForecastModel::validate() const {
    try {
        hyper.validate();
    } catch (const UsageError& e) {
        throw ModelFormatError(std::string("invalid hyperparameters: ") + e.what());
    }
    std::size_t in = hyper.regression_inputs();
    for (std::size_t i = 0; i < 3; ++i) {
        if (!same_shape(regression.trunk[i], in, kTrunkSizes[i])) throw ModelFormatError("trunk layer shape mismatch");
        in = kTrunkSizes[i];
    }
    for (const auto& head : regression.heads) {
        if (!same_shape(head[0], kTrunkSizes[2], kHeadSizes[0]) || !same_shape(head[1], kHeadSizes[0], kHeadSizes[1]))
            throw ModelFormatError("head layer shape mismatch");
    }
    in = kClassifierInputs;
    for (std::size_t i = 0; i < 3; ++i) {
        if (!same_shape(classifier.layers[i], in, kClassifierSizes[i]))
            throw ModelFormatError("classifier layer shape mismatch");
        in = kClassifierSizes[i];
    }
}

PreparedWindow prepare_window(const DetectionWindow& window, const Hyperparams& hyper) {
    PreparedWindow p;
    const auto normalized = layer_normalize(window.history);
    p.norm = normalized.norm;
    p.input = recent_omit(normalized.values, hyper.recent_omit);
    p.input.insert(p.input.end(), window.seasonality.begin(), window.seasonality.end());
    p.iqr = week_over_week_iqr(normalized.values);
    p.target = normalize(window.observed, p.norm);
    return p;
}

HeadOutputs regression_forward(const RegressionNet& net, std::span<const double> input, double iqr) {
    detail::RegressionTrace trace;
    detail::regression_forward(net, input, iqr, trace);
    return {trace.baseline, trace.lower, trace.upper, trace.irregularity};
}

Forecast forecast_forward(const DetectionWindow& window, const ForecastModel& model) {
    if (!window.valid()) throw UsageError("invalid window");
    if (window.horizon() != model.hyper.horizon) {
        throw UsageError("window horizon " + std::to_string(window.horizon()) + " does not match model horizon " +
                         std::to_string(model.hyper.horizon));
    }
    const PreparedWindow prepared = prepare_window(window, model.hyper);
    const HeadOutputs heads = regression_forward(model.regression, prepared.input, prepared.iqr);
    Forecast f;
    f.norm = prepared.norm;
    f.irregularity = heads.irregularity;
    f.norm_baseline = heads.baseline;
    f.norm_lower = heads.lower;
    f.norm_upper = heads.upper;
    f.baseline = inverse_normalize(heads.baseline, f.norm);
    f.lower = inverse_normalize(heads.lower, f.norm);
    f.upper = inverse_normalize(heads.upper, f.norm);
    return f;
}

std::array<double, 3> deviation_features(const Forecast& forecast, double observed) {
    const double n = normalize(observed, forecast.norm);
    return {n - forecast.norm_baseline, n - forecast.norm_lower, n - forecast.norm_upper};
}

double classifier_logit(const ClassifierNet& net, std::span<const double, 3> features) {
    detail::ClassifierTrace trace;
    detail::classifier_forward(net, features, trace);
    return trace.logit;
}

double classifier_forward(const Forecast& forecast, double observed, const ForecastModel& model) {
    const auto features = deviation_features(forecast, observed);
    return nn::sigmoid(classifier_logit(model.classifier, features));
}

double severity(double baseline, double lower, double upper, double observed) {
    return std::abs(baseline - observed) / std::max(std::abs(upper - lower), kSeverityFloor);
}

std::optional<PointDecision> detect_point(const DetectionWindow& window, const ForecastModel& model,
                                          const DetectOptions& options) {
    if (!window.valid()) return std::nullopt;
    PointDecision d;
    d.forecast = forecast_forward(window, model);
    d.observed = window.observed;
    d.out_of_boundary = window.observed < d.forecast.lower || window.observed > d.forecast.upper;
    d.anomaly_probability = classifier_forward(d.forecast, window.observed, model);
    d.severity = severity(d.forecast.baseline, d.forecast.lower, d.forecast.upper, window.observed);
    if (options.use_classifier) {
        const double theta = options.threshold.value_or(model.hyper.anomaly_threshold);
        d.is_anomaly = d.out_of_boundary && d.anomaly_probability >= theta;
    } else {
        d.is_anomaly = d.out_of_boundary;
    }
    return d;
}

Detector::Detector(std::vector<ForecastModel> models) {
    for (auto& m : models) add(std::move(m));
}

void Detector::add(ForecastModel model) {
    const int h = model.hyper.horizon;
    models_.insert_or_assign(h, std::move(model));
}

const ForecastModel* Detector::model_for(int horizon) const {
    auto it = models_.find(horizon);
    return it == models_.end() ? nullptr : &it->second;
}

std::vector<ForecastModel> Detector::models() const {
    std::vector<ForecastModel> out;
    for (const auto& [h, m] : models_) out.push_back(m);
    return out;
}

std::optional<PointDecision> Detector::detect(const DetectionWindow& window, const DetectOptions& options) const {
    if (!window.valid()) return std::nullopt;
    const ForecastModel* model = model_for(window.horizon());
    if (model == nullptr) return std::nullopt;
    return detect_point(window, *model, options);
}

std::vector<std::optional<PointDecision>> detect_windows(std::span<const DetectionWindow> windows,
                                                         const Detector& detector, const DetectOptions& options,
                                                         int workers) {
    std::vector<std::optional<PointDecision>> out(windows.size());
    const auto n = static_cast<std::ptrdiff_t>(windows.size());
#pragma omp parallel for schedule(static) num_threads(detail::resolve_workers(workers))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = detector.detect(windows[i], options);
    }
    return out;
}

std::vector<std::optional<PointDecision>> detect_windows_serial(std::span<const DetectionWindow> windows,
                                                                const Detector& detector,
                                                                const DetectOptions& options) {
    std::vector<std::optional<PointDecision>> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(detector.detect(w, options));
    return out;
}

} // namespace healthwatch
