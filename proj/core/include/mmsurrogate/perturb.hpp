#pragma once
// Binomial perturbation masks and their application to word and visual-box
// features.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmsurrogate/model.hpp"

namespace mmsurrogate {

enum class Modality { text, visual };

std::string_view to_string(Modality modality) noexcept;

// Word substituted for every occurrence of an inactivated word.
inline constexpr std::string_view kMaskedWord = "¤masked¤";

// S x F binary masks. Row 0 is all ones (the unperturbed input).
class PerturbationBatch {
 public:
  // Throws ArgumentError if row 0 is not all ones or an entry is not 0/1.
  PerturbationBatch(Modality modality, std::size_t samples, std::size_t features,
                    std::vector<std::uint8_t> masks);

  Modality modality() const noexcept { return modality_; }
  std::size_t samples() const noexcept { return samples_; }
  std::size_t features() const noexcept { return features_; }

  std::span<const std::uint8_t> row(std::size_t i) const noexcept {
    return {masks_.data() + i * features_, features_};
  }
  std::span<const std::uint8_t> data() const noexcept { return masks_; }

  bool operator==(const PerturbationBatch&) const = default;

 private:
  Modality modality_;
  std::size_t samples_;
  std::size_t features_;
  std::vector<std::uint8_t> masks_;
};

// Rows 1..S-1 are independent Bernoulli draws: each entry is 0 with
// probability p. Row i uses its own stream derived from (seed, i).
PerturbationBatch sample_masks(std::size_t feature_count, std::size_t samples, double p,
                               std::uint64_t seed, Modality modality = Modality::text);

struct InactivationStrategy {
  InactivationKind kind = InactivationKind::zero;
  // Spread multiplier for mean-std.
  double mean_std_k = 2.0;
};

void validate_strategy(const InactivationStrategy& strategy);

// Replaces every occurrence of each inactivated unique word with kMaskedWord.
// The mask is indexed by Instance::unique_words().
std::vector<std::string> apply_text_mask(const Instance& instance,
                                         std::span<const std::uint8_t> mask);

struct VisualFeatures {
  std::vector<Box> boxes;
  Matrix embeddings;
};

// Inactivates the masked-off box features:
//   zero       embedding row set to 0
//   mean-std   each element becomes mean + k * std * u, u in {-1, +1} per element
//   randomize  each element drawn uniformly from [row min, row max]
// The box coordinates of an inactivated row are zeroed for every strategy.
// Active rows are copied bit for bit. Row i draws from a stream derived from
// (seed, i), so the result does not depend on which other rows are masked.
VisualFeatures apply_visual_mask(const Instance& instance, std::span<const std::uint8_t> mask,
                                 const InactivationStrategy& strategy, std::uint64_t seed);

}  // namespace mmsurrogate
