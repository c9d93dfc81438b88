#include "mmsurrogate/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "mmsurrogate/errors.hpp"

namespace mmsurrogate {

double cosine_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw ArgumentError("cosine_distance: masks differ in length");
  std::size_t na = 0;
  std::size_t nb = 0;
  std::size_t dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ai = a[i] != 0;
    const bool bi = b[i] != 0;
    na += ai;
    nb += bi;
    dot += ai && bi;
  }
  if (na == 0) throw ArgumentError("cosine_distance: reference mask is all zeros");
  if (nb == 0) return 1.0;
  // sqrt of the integer product is exact for equal counts, so identical masks give 0.
  const double cos = static_cast<double>(dot) /
                     std::sqrt(static_cast<double>(na) * static_cast<double>(nb));
  return std::clamp(1.0 - cos, 0.0, 1.0);
}

double kernel_weight(double distance, double width) {
  if (!(width > 0.0) || !std::isfinite(width)) throw ArgumentError("kernel width must be > 0");
  if (!(distance >= 0.0 && distance <= 1.0)) {
    throw ArgumentError("kernel distance must be in [0, 1]");
  }
  return std::exp(-(distance * distance) / (width * width));
}

double combine_modal_weights(double w_text, double w_visual) {
  auto ok = [](double w) { return w > 0.0 && w <= 1.0; };
  if (!ok(w_text) || !ok(w_visual)) {
    throw ArgumentError("combine_modal_weights: weights must be in (0, 1]");
  }
  return (w_text + w_visual) / 2.0;
}

std::vector<double> sample_weights(const PerturbationBatch& batch, double width) {
  const std::vector<std::uint8_t> ones(batch.features(), 1);
  std::vector<double> w(batch.samples());
  for (std::size_t i = 0; i < batch.samples(); ++i) {
    w[i] = kernel_weight(cosine_distance(ones, batch.row(i)), width);
  }
  return w;
}

std::vector<double> combine_sample_weights(std::span<const double> text_weights,
                                           std::span<const double> visual_weights,
                                           WeightCombination rule) {
  if (text_weights.size() != visual_weights.size()) {
    throw ArgumentError("combine_sample_weights: modalities have different sample counts");
  }
  std::vector<double> out(text_weights.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = combine_modal_weights(text_weights[i], visual_weights[i]);
  }
  if (rule == WeightCombination::batch_max && !out.empty()) {
    const double top = *std::max_element(out.begin(), out.end());
    for (double& w : out) w /= top;
  }
  return out;
}

}  // namespace mmsurrogate
