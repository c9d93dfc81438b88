#include "mmsurrogate/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mmsurrogate/rng.hpp"

namespace mmsurrogate {

std::string_view to_string(Modality modality) noexcept {
  return modality == Modality::text ? "text" : "visual";
}

PerturbationBatch::PerturbationBatch(Modality modality, std::size_t samples,
                                     std::size_t features, std::vector<std::uint8_t> masks)
    : modality_(modality), samples_(samples), features_(features), masks_(std::move(masks)) {
  if (samples_ < 1 || features_ < 1) throw ArgumentError("batch needs samples >= 1, features >= 1");
  if (masks_.size() != samples_ * features_) {
    throw ArgumentError("batch mask storage does not match samples x features");
  }
  for (std::uint8_t v : masks_) {
    if (v > 1) throw ArgumentError("mask entries must be 0 or 1");
  }
  for (std::size_t f = 0; f < features_; ++f) {
    if (masks_[f] != 1) throw ArgumentError("row 0 of a perturbation batch must be all ones");
  }
}

PerturbationBatch sample_masks(std::size_t feature_count, std::size_t samples, double p,
                               std::uint64_t seed, Modality modality) {
  if (feature_count < 1) throw ArgumentError("sample_masks: feature count must be >= 1");
  if (samples < 1) throw ArgumentError("sample_masks: samples must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("sample_masks: p must be in [0, 1]");

  std::vector<std::uint8_t> masks(samples * feature_count, 1);
  const std::uint64_t tag = tag_hash("mask");
  for (std::size_t i = 1; i < samples; ++i) {
    Rng rng(derive_seed(seed, tag, i));
    auto* row = masks.data() + i * feature_count;
    for (std::size_t f = 0; f < feature_count; ++f) {
      // uniform() < 1 always, so p = 1 inactivates everything and p = 0 nothing.
      row[f] = rng.uniform() < p ? 0 : 1;
    }
  }
  return PerturbationBatch(modality, samples, feature_count, std::move(masks));
}

void validate_strategy(const InactivationStrategy& strategy) {
  if (!std::isfinite(strategy.mean_std_k)) throw ArgumentError("mean_std_k must be finite");
}

std::vector<std::string> apply_text_mask(const Instance& instance,
                                         std::span<const std::uint8_t> mask) {
  const auto& unique = instance.unique_words();
  if (mask.size() != unique.size()) {
    throw DimensionError("text mask has length " + std::to_string(mask.size()) + ", instance '" +
                         instance.id() + "' has " + std::to_string(unique.size()) +
                         " unique words");
  }
  std::unordered_map<std::string_view, bool> inactive;
  for (std::size_t i = 0; i < unique.size(); ++i) inactive[unique[i]] = mask[i] == 0;

  std::vector<std::string> out = instance.words();
  for (auto& w : out) {
    if (inactive.at(w)) w = std::string(kMaskedWord);
  }
  return out;
}

VisualFeatures apply_visual_mask(const Instance& instance, std::span<const std::uint8_t> mask,
                                 const InactivationStrategy& strategy, std::uint64_t seed) {
  validate_strategy(strategy);
  if (mask.size() != instance.box_count()) {
    throw DimensionError("visual mask has length " + std::to_string(mask.size()) +
                         ", instance '" + instance.id() + "' has " +
                         std::to_string(instance.box_count()) + " boxes");
  }
  VisualFeatures out{instance.boxes(), instance.embeddings()};
  const std::size_t dim = instance.embedding_dim();
  const std::uint64_t tag = tag_hash("inactivate");

  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0) continue;
    out.boxes[i] = Box{};
    auto row = out.embeddings.row(i);
    switch (strategy.kind) {
      case InactivationKind::zero:
        std::fill(row.begin(), row.end(), 0.0);
        break;
      case InactivationKind::mean_std: {
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= static_cast<double>(dim);
        double var = 0.0;
        for (double v : row) var += (v - mean) * (v - mean);
        // Population standard deviation of the row.
        const double sd = std::sqrt(var / static_cast<double>(dim));
        Rng rng(derive_seed(seed, tag, i));
        for (double& v : row) v = mean + strategy.mean_std_k * sd * rng.sign();
        break;
      }
      case InactivationKind::randomize: {
        const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
        const double a = *lo;
        const double b = *hi;
        Rng rng(derive_seed(seed, tag, i));
        for (double& v : row) v = rng.uniform(a, b);
        break;
      }
    }
  }
  return out;
}

}  // namespace mmsurrogate
