#pragma once
// JSON file formats. Every top-level document carries "format_version": 1.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsurrogate/eval.hpp"
#include "mmsurrogate/model.hpp"
#include "mmsurrogate/predictor.hpp"

namespace mmsurrogate {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

// Pretty-printed with sorted keys and a trailing newline; byte-stable.
std::string dump_json(const nlohmann::json& j);

nlohmann::json to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& j);
Instance load_instance(const std::filesystem::path& path);
void save_instance(const std::filesystem::path& path, const Instance& instance);

nlohmann::json to_json(const ExpertAnnotation& annotation);
ExpertAnnotation annotation_from_json(const nlohmann::json& j);
// Accepts one annotation object, a bare array, or {"annotations": [...]}.
std::vector<ExpertAnnotation> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path,
                      const std::vector<ExpertAnnotation>& annotations);

nlohmann::json to_json(const Explanation& explanation);
Explanation explanation_from_json(const nlohmann::json& j);
Explanation load_explanation(const std::filesystem::path& path);
void save_explanation(const std::filesystem::path& path, const Explanation& explanation);

nlohmann::json to_json(const ExplainerConfig& config);
// Overlays the keys present in j onto base. Unknown keys are a ConfigError.
ExplainerConfig config_from_json(const nlohmann::json& j, ExplainerConfig base = {});

nlohmann::json to_json(const SyntheticLogisticModel& model);
SyntheticLogisticModel model_from_json(const nlohmann::json& j);
SyntheticLogisticModel load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const SyntheticLogisticModel& model);

nlohmann::json to_json(const SimilarityReport& report);
SimilarityReport similarity_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AggregateReport& report);

}  // namespace mmsurrogate
