#pragma once
// The black-box prediction contract and in-process predictors.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mmsurrogate/model.hpp"
#include "mmsurrogate/perturb.hpp"

namespace mmsurrogate {

// One perturbed query: masks over the instance's unique words and boxes.
// The predictor applies the masks itself, using `strategy` and `strategy_seed`
// for the visual inactivation.
struct PredictionRequest {
  std::string request_id;
  std::string instance_id;
  std::vector<std::uint8_t> token_mask;
  std::vector<std::uint8_t> visual_mask;
  InactivationKind strategy = InactivationKind::zero;
  std::uint64_t strategy_seed = 0;

  bool operator==(const PredictionRequest&) const = default;
};

// Independent per-finding probabilities in [0, 1].
struct Prediction {
  std::map<std::string, double> probabilities;

  bool operator==(const Prediction&) const = default;
};

void validate_request(const PredictionRequest& request, const Instance& instance);

class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::string identifier() const = 0;

  // One prediction per request, in request order.
  virtual std::vector<Prediction> predict(const Instance& instance,
                                          std::span<const PredictionRequest> requests) = 0;
};

struct FindingWeights {
  double bias = 0.0;
  std::map<std::string, double> word_weights;
  std::map<std::size_t, double> box_weights;

  bool operator==(const FindingWeights&) const = default;
};

// Per finding: p = logistic(bias + sum of active word weights + sum of active
// box weights). Words without an entry weigh 0.
struct SyntheticLogisticModel {
  std::map<std::string, FindingWeights> findings;

  bool operator==(const SyntheticLogisticModel&) const = default;
};

void validate_model(const SyntheticLogisticModel& model);

Prediction synthetic_predict(const SyntheticLogisticModel& model, const Instance& instance,
                             std::span<const std::uint8_t> token_mask,
                             std::span<const std::uint8_t> visual_mask);

class SyntheticPredictor final : public Predictor {
 public:
  explicit SyntheticPredictor(SyntheticLogisticModel model, std::string identifier = "synthetic");

  std::string identifier() const override { return identifier_; }
  std::vector<Prediction> predict(const Instance& instance,
                                  std::span<const PredictionRequest> requests) override;

  const SyntheticLogisticModel& model() const noexcept { return model_; }

 private:
  SyntheticLogisticModel model_;
  std::string identifier_;
};

// A model that consumes perturbed features directly.
using FeatureModel = std::function<std::map<std::string, double>(
    const std::vector<std::string>& words, const std::vector<Box>& boxes,
    const Matrix& embeddings)>;

// Applies each request's masks with the perturb module, then calls the model.
class FeaturePredictor final : public Predictor {
 public:
  FeaturePredictor(std::string identifier, FeatureModel model, double mean_std_k = 2.0);

  std::string identifier() const override { return identifier_; }
  std::vector<Prediction> predict(const Instance& instance,
                                  std::span<const PredictionRequest> requests) override;

 private:
  std::string identifier_;
  FeatureModel model_;
  double mean_std_k_;
};

// Forwards to another predictor and counts traffic.
class CountingPredictor final : public Predictor {
 public:
  explicit CountingPredictor(Predictor& inner) : inner_(inner) {}

  std::string identifier() const override { return inner_.identifier(); }
  std::vector<Prediction> predict(const Instance& instance,
                                  std::span<const PredictionRequest> requests) override;

  std::size_t requests() const noexcept { return requests_; }
  std::size_t calls() const noexcept { return calls_; }

 private:
  Predictor& inner_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> calls_{0};
};

}  // namespace mmsurrogate
