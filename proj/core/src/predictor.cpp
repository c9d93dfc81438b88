#include "mmsurrogate/predictor.hpp"

#include <cmath>

#include "mmsurrogate/errors.hpp"

namespace mmsurrogate {

namespace {

double logistic(double x) {
  // Split form avoids exp overflow for large |x|.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_masks(const Instance& instance, std::span<const std::uint8_t> token_mask,
                 std::span<const std::uint8_t> visual_mask) {
  if (token_mask.size() != instance.unique_words().size()) {
    throw DimensionError("token mask has length " + std::to_string(token_mask.size()) +
                         ", instance '" + instance.id() + "' has " +
                         std::to_string(instance.unique_words().size()) + " unique words");
  }
  if (visual_mask.size() != instance.box_count()) {
    throw DimensionError("visual mask has length " + std::to_string(visual_mask.size()) +
                         ", instance '" + instance.id() + "' has " +
                         std::to_string(instance.box_count()) + " boxes");
  }
  for (auto v : token_mask) {
    if (v > 1) throw ArgumentError("token mask entries must be 0 or 1");
  }
  for (auto v : visual_mask) {
    if (v > 1) throw ArgumentError("visual mask entries must be 0 or 1");
  }
}

}  // namespace

void validate_request(const PredictionRequest& request, const Instance& instance) {
  if (request.request_id.empty()) throw ArgumentError("request_id must be non-empty");
  if (request.instance_id != instance.id()) {
    throw ArgumentError("request '" + request.request_id + "' targets instance '" +
                        request.instance_id + "', not '" + instance.id() + "'");
  }
  check_masks(instance, request.token_mask, request.visual_mask);
}

void validate_model(const SyntheticLogisticModel& model) {
  if (model.findings.empty()) throw ValidationError("synthetic model has no findings");
  for (const auto& [label, fw] : model.findings) {
    if (!std::isfinite(fw.bias)) throw ValidationError("synthetic model: non-finite bias");
    for (const auto& [w, v] : fw.word_weights) {
      if (!std::isfinite(v)) throw ValidationError("synthetic model: non-finite weight for '" + w + "'");
    }
    for (const auto& [i, v] : fw.box_weights) {
      if (!std::isfinite(v)) {
        throw ValidationError("synthetic model: non-finite weight for box " + std::to_string(i));
      }
    }
  }
}

Prediction synthetic_predict(const SyntheticLogisticModel& model, const Instance& instance,
                             std::span<const std::uint8_t> token_mask,
                             std::span<const std::uint8_t> visual_mask) {
  check_masks(instance, token_mask, visual_mask);
  const auto& unique = instance.unique_words();
  Prediction out;
  for (const auto& [label, fw] : model.findings) {
    double logit = fw.bias;
    for (std::size_t i = 0; i < unique.size(); ++i) {
      if (token_mask[i] == 0) continue;
      if (auto it = fw.word_weights.find(unique[i]); it != fw.word_weights.end()) {
        logit += it->second;
      }
    }
    for (const auto& [idx, w] : fw.box_weights) {
      if (idx < visual_mask.size() && visual_mask[idx] != 0) logit += w;
    }
    out.probabilities[label] = logistic(logit);
  }
  return out;
}

SyntheticPredictor::SyntheticPredictor(SyntheticLogisticModel model, std::string identifier)
    : model_(std::move(model)), identifier_(std::move(identifier)) {
  validate_model(model_);
}

std::vector<Prediction> SyntheticPredictor::predict(const Instance& instance,
                                                    std::span<const PredictionRequest> requests) {
  std::vector<Prediction> out;
  out.reserve(requests.size());
  for (const auto& r : requests) {
    validate_request(r, instance);
    out.push_back(synthetic_predict(model_, instance, r.token_mask, r.visual_mask));
  }
  return out;
}

FeaturePredictor::FeaturePredictor(std::string identifier, FeatureModel model, double mean_std_k)
    : identifier_(std::move(identifier)), model_(std::move(model)), mean_std_k_(mean_std_k) {}

std::vector<Prediction> FeaturePredictor::predict(const Instance& instance,
                                                  std::span<const PredictionRequest> requests) {
  std::vector<Prediction> out;
  out.reserve(requests.size());
  for (const auto& r : requests) {
    validate_request(r, instance);
    const auto words = apply_text_mask(instance, r.token_mask);
    const auto visual = apply_visual_mask(instance, r.visual_mask,
                                          InactivationStrategy{r.strategy, mean_std_k_},
                                          r.strategy_seed);
    Prediction p{model_(words, visual.boxes, visual.embeddings)};
    for (const auto& [label, v] : p.probabilities) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw PredictorError("feature model returned probability outside [0, 1] for '" + label +
                             "'");
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Prediction> CountingPredictor::predict(const Instance& instance,
                                                   std::span<const PredictionRequest> requests) {
  ++calls_;
  requests_ += requests.size();
  return inner_.predict(instance, requests);
}

}  // namespace mmsurrogate
