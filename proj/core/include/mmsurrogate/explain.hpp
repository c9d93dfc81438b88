#pragma once
// The two explainable-model pipelines: separate perturbations (one surrogate
// per modality, the other modality held at its original) and simultaneous
// perturbations (one surrogate over concatenated masks).

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "mmsurrogate/kernel.hpp"
#include "mmsurrogate/model.hpp"
#include "mmsurrogate/predictor.hpp"

namespace mmsurrogate {

// Stream tags for sub-seeds: derive_seed(config.seed, tag).
inline constexpr std::string_view kTextTag = "text";
inline constexpr std::string_view kVisualTag = "visual";
inline constexpr std::string_view kSimultaneousTextTag = "simultaneous-text";
inline constexpr std::string_view kSimultaneousVisualTag = "simultaneous-visual";

std::vector<WordItem> explain_text_only(const Instance& instance, std::string_view finding,
                                        Predictor& predictor, const ExplainerConfig& config);

std::vector<BoxItem> explain_visual_only(const Instance& instance, std::string_view finding,
                                         Predictor& predictor, const ExplainerConfig& config);

// 2 * samples predictor requests.
Explanation explain_separate(const Instance& instance, std::string_view finding,
                             Predictor& predictor, const ExplainerConfig& config);

// samples predictor requests.
Explanation explain_simultaneous(const Instance& instance, std::string_view finding,
                                 Predictor& predictor, const ExplainerConfig& config,
                                 WeightCombination combination = WeightCombination::halve);

// Uniformly sampled words and boxes without replacement, all scores 0.
// Throws ArgumentError if k exceeds the candidate count.
Explanation random_explanation(const Instance& instance, std::string_view finding,
                               std::size_t k_words, std::size_t k_boxes, std::uint64_t seed);

}  // namespace mmsurrogate
