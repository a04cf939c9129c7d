#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "nvcssl/em.hpp"
#include "nvcssl/simulate.hpp"

namespace nvcssl {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const FitResult& fit);
// Restores the fields needed for prediction and reporting. Ladder runs come
// back as summaries without per-iteration traces.
FitResult model_from_json(const nlohmann::json& j);

void save_model(const FitResult& fit, const std::filesystem::path& path);
FitResult load_model(const std::filesystem::path& path);

nlohmann::json truth_to_json(const Truth& truth, const Scenario& scenario);

}  // namespace nvcssl
