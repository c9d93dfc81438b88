#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmsurrogate/perturb.hpp"

namespace mmsurrogate {

// 1 - a.b / (|a||b|) on binary masks; 1.0 when b is all zeros.
// Throws ArgumentError on length mismatch or when a is all zeros.
double cosine_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

// exp(-d^2 / width^2).
double kernel_weight(double distance, double width);

// Sum of the two modality weights, halved back into (0, 1].
double combine_modal_weights(double w_text, double w_visual);

// Kernel weight of every row against the all-ones original. weights[0] == 1.
std::vector<double> sample_weights(const PerturbationBatch& batch, double width);

// How per-sample text and visual weights are merged for simultaneous mode.
//   halve     (w_t + w_v) / 2 per sample
//   batch_max (w_t + w_v) / max over the batch of (w_t + w_v)
// Both keep the unperturbed pair at exactly 1.
enum class WeightCombination { halve, batch_max };

std::vector<double> combine_sample_weights(std::span<const double> text_weights,
                                           std::span<const double> visual_weights,
                                           WeightCombination rule = WeightCombination::halve);

}  // namespace mmsurrogate
