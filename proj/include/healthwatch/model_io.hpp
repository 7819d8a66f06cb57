#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "healthwatch/detector.hpp"

namespace healthwatch {

/// Current weight-file format version.
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Little-endian container: magic "HWFM", version, model count, per-model hyperparameters and
/// layer shapes/weights as IEEE-754 doubles, trailing CRC-32. Round trips are bit-exact.
std::string serialize_models(std::span<const ForecastModel> models);
std::vector<ForecastModel> deserialize_models(std::string_view bytes);

void save_models(const std::filesystem::path& path, std::span<const ForecastModel> models);
std::vector<ForecastModel> load_models(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const ForecastModel& model);
/// Loads a file holding exactly one model.
ForecastModel load_model(const std::filesystem::path& path);

} // namespace healthwatch
