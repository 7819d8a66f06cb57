#include "healthwatch/statistic.hpp"

#include <charconv>

#include "healthwatch/error.hpp"

namespace healthwatch {

std::string StatisticKind::name() const {
    switch (kind_) {
    case Kind::mean: return "mean";
    case Kind::std: return "std";
    case Kind::quantile: return "p" + std::to_string(percent_);
    case Kind::coverage_nondefault: return "coverage_nondefault";
    case Kind::coverage_nonmissing: return "coverage_nonmissing";
    case Kind::score_mean: return "score_mean";
    case Kind::score_std: return "score_std";
    case Kind::score_quantile: return "score_p" + std::to_string(percent_);
    case Kind::traffic: return "traffic";
    case Kind::traffic_ratio: return "traffic_ratio";
    }
    return "unknown";
}

namespace {

int parse_percent(std::string_view digits, std::string_view whole) {
    int value = -1;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size() || value <= 0 || value >= 100) {
        throw DataError("unknown statistic '" + std::string(whole) + "'");
    }
    return value;
}

} // namespace

StatisticKind StatisticKind::parse(std::string_view name) {
    if (name == "mean") return {Kind::mean};
    if (name == "std") return {Kind::std};
    if (name == "coverage_nondefault") return {Kind::coverage_nondefault};
    if (name == "coverage_nonmissing") return {Kind::coverage_nonmissing};
    if (name == "score_mean") return {Kind::score_mean};
    if (name == "score_std") return {Kind::score_std};
    if (name == "traffic") return {Kind::traffic};
    if (name == "traffic_ratio") return {Kind::traffic_ratio};
    if (name.starts_with("score_p")) return score_quantile(parse_percent(name.substr(7), name));
    if (name.starts_with("p")) return feature_quantile(parse_percent(name.substr(1), name));
    throw DataError("unknown statistic '" + std::string(name) + "'");
}

} // namespace healthwatch
