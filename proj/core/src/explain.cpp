#include "mmsurrogate/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmsurrogate/perturb.hpp"
#include "mmsurrogate/rng.hpp"
#include "mmsurrogate/surrogate.hpp"

namespace mmsurrogate {

namespace {

void require_finding(std::string_view finding, const ExplainerConfig& config) {
  if (std::find(config.findings.begin(), config.findings.end(), finding) != config.findings.end()) {
    return;
  }
  std::string labels;
  for (const auto& l : config.findings) labels += (labels.empty() ? "" : ", ") + l;
  throw ConfigError({"unknown finding '" + std::string(finding) + "' (expected one of: " + labels + ")"});
}

std::string request_id(const Instance& instance, std::string_view finding, std::string_view tag,
                       std::uint64_t stream_seed, std::size_t index) {
  return instance.id() + "/" + std::string(finding) + "/" + std::string(tag) + "/" +
         std::to_string(stream_seed) + "/" + std::to_string(index);
}

std::vector<Prediction> query(Predictor& predictor, const Instance& instance,
                              const std::vector<PredictionRequest>& requests,
                              std::size_t batch_size) {
  std::vector<Prediction> out;
  out.reserve(requests.size());
  const std::span<const PredictionRequest> all(requests);
  for (std::size_t start = 0; start < all.size(); start += batch_size) {
    const auto batch = all.subspan(start, std::min(batch_size, all.size() - start));
    auto preds = predictor.predict(instance, batch);
    if (preds.size() != batch.size()) {
      throw PredictorError("predictor '" + predictor.identifier() + "' returned " +
                           std::to_string(preds.size()) + " predictions for " +
                           std::to_string(batch.size()) + " requests");
    }
    std::move(preds.begin(), preds.end(), std::back_inserter(out));
  }
  return out;
}

// Probability of the finding per sample, or its cross-entropy against the
// label predicted for the unperturbed input (sample 0).
std::vector<double> regression_targets(const std::vector<Prediction>& preds,
                                       std::string_view finding, RegressionTarget target) {
  std::vector<double> probs(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto it = preds[i].probabilities.find(std::string(finding));
    if (it == preds[i].probabilities.end()) {
      throw PredictorError("prediction lacks finding '" + std::string(finding) + "'");
    }
    probs[i] = it->second;
  }
  if (target == RegressionTarget::probability) return probs;

  constexpr double eps = 1e-12;
  const bool positive = probs.at(0) >= 0.5;
  for (double& p : probs) {
    const double c = std::clamp(p, eps, 1.0 - eps);
    p = positive ? -std::log(c) : -std::log(1.0 - c);
  }
  return probs;
}

Matrix design_matrix(const PerturbationBatch& batch) {
  Matrix m(batch.samples(), batch.features());
  for (std::size_t i = 0; i < batch.samples(); ++i) {
    const auto row = batch.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) m(i, j) = row[j];
  }
  return m;
}

std::vector<RankedFeature> top_features(std::span<const double> coefficients, std::size_t k,
                                        const std::optional<double>& threshold) {
  auto ranked = rank_features(coefficients, k);
  if (threshold) {
    std::erase_if(ranked, [&](const RankedFeature& f) { return std::abs(f.score) < *threshold; });
  }
  return ranked;
}

std::vector<WordItem> to_word_items(const Instance& instance,
                                    const std::vector<RankedFeature>& ranked) {
  std::vector<WordItem> out;
  out.reserve(ranked.size());
  for (const auto& f : ranked) out.push_back({instance.unique_words()[f.index], f.score});
  return out;
}

std::vector<BoxItem> to_box_items(const Instance& instance,
                                  const std::vector<RankedFeature>& ranked) {
  std::vector<BoxItem> out;
  out.reserve(ranked.size());
  for (const auto& f : ranked) out.push_back({f.index, instance.boxes()[f.index], f.score});
  return out;
}

struct ModalityRun {
  std::vector<RankedFeature> ranked;
  double original_probability = 0.0;
};

// One surrogate over a single modality; the other modality stays all ones.
ModalityRun run_single_modality(const Instance& instance, std::string_view finding,
                                Predictor& predictor, const ExplainerConfig& config,
                                Modality modality) {
  const bool text = modality == Modality::text;
  const std::string_view tag = text ? kTextTag : kVisualTag;
  const std::uint64_t stream = derive_seed(config.seed, tag);
  const std::size_t features = text ? instance.unique_words().size() : instance.box_count();
  const auto batch = sample_masks(features, config.samples, text ? config.p_text : config.p_visual,
                                  stream, modality);
  const auto weights = sample_weights(batch, config.kernel_width);

  const std::vector<std::uint8_t> all_words(instance.unique_words().size(), 1);
  const std::vector<std::uint8_t> all_boxes(instance.box_count(), 1);
  std::vector<PredictionRequest> requests(config.samples);
  for (std::size_t i = 0; i < config.samples; ++i) {
    auto& r = requests[i];
    r.request_id = request_id(instance, finding, tag, stream, i);
    r.instance_id = instance.id();
    const auto row = batch.row(i);
    r.token_mask = text ? std::vector<std::uint8_t>(row.begin(), row.end()) : all_words;
    r.visual_mask = text ? all_boxes : std::vector<std::uint8_t>(row.begin(), row.end());
    r.strategy = config.inactivation;
    r.strategy_seed = derive_seed(stream, "strategy", i);
  }
  const auto preds = query(predictor, instance, requests, config.batch_size);
  const auto targets = regression_targets(preds, finding, config.target);
  const auto probs = regression_targets(preds, finding, RegressionTarget::probability);

  if (config.samples < 2) {
    // A single (unperturbed) sample carries no contrast; every feature scores 0.
    std::vector<double> zeros(features, 0.0);
    return {top_features(zeros, text ? config.k_words : config.k_boxes, config.score_threshold),
            probs[0]};
  }
  const auto fit = fit_weighted_ridge(design_matrix(batch), targets, weights, config.ridge_lambda);
  return {top_features(fit.coefficients, text ? config.k_words : config.k_boxes,
                       config.score_threshold),
          probs[0]};
}

Provenance make_provenance(const ExplainerConfig& config, const Predictor& predictor,
                           std::uint64_t text_seed, std::uint64_t visual_seed) {
  Provenance p;
  p.seed = config.seed;
  p.text_seed = text_seed;
  p.visual_seed = visual_seed;
  p.samples = config.samples;
  p.p_text = config.p_text;
  p.p_visual = config.p_visual;
  p.kernel_width = config.kernel_width;
  p.ridge_lambda = config.ridge_lambda;
  p.strategy = config.inactivation;
  p.mean_std_k = config.mean_std_k;
  p.target = config.target;
  p.predictor = predictor.identifier();
  return p;
}

}  // namespace

std::vector<WordItem> explain_text_only(const Instance& instance, std::string_view finding,
                                        Predictor& predictor, const ExplainerConfig& config) {
  validate_config(config);
  require_finding(finding, config);
  return to_word_items(instance,
                       run_single_modality(instance, finding, predictor, config, Modality::text).ranked);
}

std::vector<BoxItem> explain_visual_only(const Instance& instance, std::string_view finding,
                                         Predictor& predictor, const ExplainerConfig& config) {
  validate_config(config);
  require_finding(finding, config);
  return to_box_items(
      instance, run_single_modality(instance, finding, predictor, config, Modality::visual).ranked);
}

Explanation explain_separate(const Instance& instance, std::string_view finding,
                             Predictor& predictor, const ExplainerConfig& config) {
  validate_config(config);
  require_finding(finding, config);
  const auto text = run_single_modality(instance, finding, predictor, config, Modality::text);
  const auto visual = run_single_modality(instance, finding, predictor, config, Modality::visual);

  Explanation e;
  e.instance_id = instance.id();
  e.finding = std::string(finding);
  e.mode = ExplanationMode::separate;
  e.word_items = to_word_items(instance, text.ranked);
  e.box_items = to_box_items(instance, visual.ranked);
  e.provenance = make_provenance(config, predictor, derive_seed(config.seed, kTextTag),
                                 derive_seed(config.seed, kVisualTag));
  e.original_probability = text.original_probability;
  return e;
}

Explanation explain_simultaneous(const Instance& instance, std::string_view finding,
                                 Predictor& predictor, const ExplainerConfig& config,
                                 WeightCombination combination) {
  validate_config(config);
  require_finding(finding, config);
  const std::size_t n_words = instance.unique_words().size();
  const std::size_t n_boxes = instance.box_count();
  const std::uint64_t text_seed = derive_seed(config.seed, kSimultaneousTextTag);
  const std::uint64_t visual_seed = derive_seed(config.seed, kSimultaneousVisualTag);
  const auto text_batch = sample_masks(n_words, config.samples, config.p_text, text_seed, Modality::text);
  const auto visual_batch =
      sample_masks(n_boxes, config.samples, config.p_visual, visual_seed, Modality::visual);
  const auto weights = combine_sample_weights(sample_weights(text_batch, config.kernel_width),
                                              sample_weights(visual_batch, config.kernel_width),
                                              combination);

  std::vector<PredictionRequest> requests(config.samples);
  Matrix design(config.samples, n_words + n_boxes);
  for (std::size_t i = 0; i < config.samples; ++i) {
    auto& r = requests[i];
    r.request_id = request_id(instance, finding, "simultaneous", text_seed, i);
    r.instance_id = instance.id();
    const auto t = text_batch.row(i);
    const auto v = visual_batch.row(i);
    r.token_mask.assign(t.begin(), t.end());
    r.visual_mask.assign(v.begin(), v.end());
    r.strategy = config.inactivation;
    r.strategy_seed = derive_seed(visual_seed, "strategy", i);
    for (std::size_t j = 0; j < n_words; ++j) design(i, j) = t[j];
    for (std::size_t j = 0; j < n_boxes; ++j) design(i, n_words + j) = v[j];
  }
  const auto preds = query(predictor, instance, requests, config.batch_size);
  const auto targets = regression_targets(preds, finding, config.target);
  const auto probs = regression_targets(preds, finding, RegressionTarget::probability);

  std::vector<double> coefficients(n_words + n_boxes, 0.0);
  if (config.samples >= 2) {
    coefficients = fit_weighted_ridge(design, targets, weights, config.ridge_lambda).coefficients;
  }
  const std::span<const double> all(coefficients);

  Explanation e;
  e.instance_id = instance.id();
  e.finding = std::string(finding);
  e.mode = ExplanationMode::simultaneous;
  e.word_items = to_word_items(
      instance, top_features(all.first(n_words), config.k_words, config.score_threshold));
  e.box_items = to_box_items(
      instance, top_features(all.subspan(n_words), config.k_boxes, config.score_threshold));
  e.provenance = make_provenance(config, predictor, text_seed, visual_seed);
  e.original_probability = probs[0];
  return e;
}

Explanation random_explanation(const Instance& instance, std::string_view finding,
                               std::size_t k_words, std::size_t k_boxes, std::uint64_t seed) {
  const auto& words = instance.unique_words();
  if (k_words > words.size()) {
    throw ArgumentError("random_explanation: k_words = " + std::to_string(k_words) +
                        " exceeds the " + std::to_string(words.size()) + " unique words of '" +
                        instance.id() + "'");
  }
  if (k_boxes > instance.box_count()) {
    throw ArgumentError("random_explanation: k_boxes = " + std::to_string(k_boxes) +
                        " exceeds the " + std::to_string(instance.box_count()) + " boxes of '" +
                        instance.id() + "'");
  }
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  auto draw = [](std::size_t n, std::size_t k, Rng rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(k);
    return idx;
  };
  const std::uint64_t word_seed = derive_seed(seed, "random-words");
  const std::uint64_t box_seed = derive_seed(seed, "random-boxes");

  Explanation e;
  e.instance_id = instance.id();
  e.finding = std::string(finding);
  e.mode = ExplanationMode::random_baseline;
  for (std::size_t i : draw(words.size(), k_words, Rng(word_seed))) {
    e.word_items.push_back({words[i], 0.0});
  }
  for (std::size_t i : draw(instance.box_count(), k_boxes, Rng(box_seed))) {
    e.box_items.push_back({i, instance.boxes()[i], 0.0});
  }
  e.provenance.seed = seed;
  e.provenance.text_seed = word_seed;
  e.provenance.visual_seed = box_seed;
  e.provenance.predictor = "random";
  return e;
}

}  // namespace mmsurrogate
