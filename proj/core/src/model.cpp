#include "mmsurrogate/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace mmsurrogate {

namespace {

std::string describe_box(const Box& b) {
  return "(" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " + std::to_string(b.x2) +
         ", " + std::to_string(b.y2) + ")";
}

bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

void validate_box(const Box& box, double image_width, double image_height,
                  std::string_view context) {
  const std::string where = context.empty() ? std::string("box ") + describe_box(box)
                                            : std::string(context) + " " + describe_box(box);
  if (!std::isfinite(box.x1) || !std::isfinite(box.y1) || !std::isfinite(box.x2) ||
      !std::isfinite(box.y2)) {
    throw ValidationError(where + ": coordinates must be finite");
  }
  if (box.x1 < 0.0 || box.y1 < 0.0) throw ValidationError(where + ": 0 <= x1, y1 violated");
  if (!(box.x1 < box.x2)) throw ValidationError(where + ": x1 < x2 violated");
  if (!(box.y1 < box.y2)) throw ValidationError(where + ": y1 < y2 violated");
  if (box.x2 > image_width) throw ValidationError(where + ": x2 <= image_width violated");
  if (box.y2 > image_height) throw ValidationError(where + ": y2 <= image_height violated");
}

std::string normalize_word(std::string_view word) {
  std::string out;
  out.reserve(word.size());
  for (char ch : word) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::ispunct(c)) continue;
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  return out;
}

const std::vector<std::string>& default_findings() {
  static const std::vector<std::string> labels{"atelectasis", "cardiomegaly", "nodule"};
  return labels;
}

void validate_label_set(std::span<const std::string> labels) {
  if (labels.empty()) throw ValidationError("finding label set must be non-empty");
  std::unordered_set<std::string> seen;
  for (const auto& l : labels) {
    if (l.empty()) throw ValidationError("finding labels must be non-empty");
    if (!seen.insert(l).second) throw ValidationError("duplicate finding label '" + l + "'");
  }
}

Instance Instance::create(std::string id, std::vector<std::string> words, double image_width,
                          double image_height, std::vector<Box> boxes, Matrix embeddings,
                          std::vector<std::string> gold_findings) {
  if (id.empty()) throw ValidationError("instance id must be non-empty");
  if (!(image_width > 0.0) || !(image_height > 0.0) || !std::isfinite(image_width) ||
      !std::isfinite(image_height)) {
    throw ValidationError("instance '" + id + "': image dimensions must be positive and finite");
  }
  if (words.empty()) throw ValidationError("instance '" + id + "': words must be non-empty");
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (has_whitespace(words[i])) {
      throw ValidationError("instance '" + id + "': word " + std::to_string(i) +
                            " contains whitespace");
    }
    std::string normalized = normalize_word(words[i]);
    if (normalized.empty()) {
      throw ValidationError("instance '" + id + "': word " + std::to_string(i) + " ('" +
                            words[i] + "') is empty after normalization");
    }
    words[i] = std::move(normalized);
  }
  if (boxes.empty()) throw ValidationError("instance '" + id + "': at least one box required");
  if (boxes.size() != embeddings.rows()) {
    throw DimensionError("instance '" + id + "': " + std::to_string(boxes.size()) +
                         " boxes but " + std::to_string(embeddings.rows()) + " embedding rows");
  }
  if (embeddings.cols() == 0) {
    throw DimensionError("instance '" + id + "': embedding dimension must be >= 1");
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    validate_box(boxes[i], image_width, image_height,
                 "instance '" + id + "' box " + std::to_string(i));
  }
  for (double v : embeddings.data()) {
    if (!std::isfinite(v)) throw ValidationError("instance '" + id + "': non-finite embedding");
  }
  std::sort(gold_findings.begin(), gold_findings.end());
  gold_findings.erase(std::unique(gold_findings.begin(), gold_findings.end()),
                      gold_findings.end());

  Instance inst;
  inst.id_ = std::move(id);
  inst.words_ = std::move(words);
  inst.image_width_ = image_width;
  inst.image_height_ = image_height;
  inst.boxes_ = std::move(boxes);
  inst.embeddings_ = std::move(embeddings);
  inst.gold_findings_ = std::move(gold_findings);
  std::unordered_set<std::string> seen;
  for (const auto& w : inst.words_) {
    if (seen.insert(w).second) inst.unique_words_.push_back(w);
  }
  return inst;
}

ExpertAnnotation ExpertAnnotation::create(std::string annotator_id, std::string instance_id,
                                          std::set<std::string> finding_context,
                                          std::vector<std::string> words, std::vector<Box> boxes) {
  if (annotator_id.empty()) throw ValidationError("annotation: annotator_id must be non-empty");
  if (instance_id.empty()) throw ValidationError("annotation: instance_id must be non-empty");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::string ctx = "annotation by '" + annotator_id + "' on '" + instance_id + "'";
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    validate_box(boxes[i], inf, inf, ctx + " box " + std::to_string(i));
  }
  ExpertAnnotation a;
  a.annotator_id = std::move(annotator_id);
  a.instance_id = std::move(instance_id);
  a.finding_context = std::move(finding_context);
  for (const auto& w : words) {
    if (has_whitespace(w)) throw ValidationError(ctx + ": word '" + w + "' contains whitespace");
    std::string n = normalize_word(w);
    if (n.empty()) throw ValidationError(ctx + ": word '" + w + "' is empty after normalization");
    a.words.insert(std::move(n));
  }
  a.boxes = std::move(boxes);
  return a;
}

void ExpertAnnotation::validate_against(const Instance& instance) const {
  if (instance.id() != instance_id) {
    throw ValidationError("annotation for '" + instance_id + "' checked against instance '" +
                          instance.id() + "'");
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    validate_box(boxes[i], instance.image_width(), instance.image_height(),
                 "annotation by '" + annotator_id + "' box " + std::to_string(i));
  }
}

std::string_view to_string(InactivationKind kind) noexcept {
  switch (kind) {
    case InactivationKind::zero:
      return "zero";
    case InactivationKind::mean_std:
      return "mean-std";
    case InactivationKind::randomize:
      return "randomize";
  }
  return "zero";
}

InactivationKind parse_inactivation_kind(std::string_view name) {
  if (name == "zero") return InactivationKind::zero;
  if (name == "mean-std") return InactivationKind::mean_std;
  if (name == "randomize") return InactivationKind::randomize;
  throw ParseError("unknown inactivation strategy '" + std::string(name) +
                   "' (expected zero, mean-std or randomize)");
}

std::string_view to_string(ExplanationMode mode) noexcept {
  switch (mode) {
    case ExplanationMode::separate:
      return "separate";
    case ExplanationMode::simultaneous:
      return "simultaneous";
    case ExplanationMode::random_baseline:
      return "random-baseline";
  }
  return "separate";
}

ExplanationMode parse_explanation_mode(std::string_view name) {
  if (name == "separate") return ExplanationMode::separate;
  if (name == "simultaneous") return ExplanationMode::simultaneous;
  if (name == "random-baseline") return ExplanationMode::random_baseline;
  throw ParseError("unknown explanation mode '" + std::string(name) + "'");
}

std::string_view to_string(RegressionTarget target) noexcept {
  return target == RegressionTarget::loss ? "loss" : "probability";
}

RegressionTarget parse_regression_target(std::string_view name) {
  if (name == "probability") return RegressionTarget::probability;
  if (name == "loss") return RegressionTarget::loss;
  throw ParseError("unknown regression target '" + std::string(name) + "'");
}

namespace {

template <typename Item, typename Key>
void check_ranking(const std::vector<Item>& items, Key key, const std::string& what) {
  for (std::size_t i = 1; i < items.size(); ++i) {
    const double prev = std::abs(items[i - 1].score);
    const double cur = std::abs(items[i].score);
    if (prev < cur || (prev == cur && key(items[i - 1]) > key(items[i]))) {
      throw ValidationError("explanation " + what + " are not in ranking order");
    }
  }
}

}  // namespace

void validate_explanation(const Explanation& e, const Instance* instance) {
  if (e.instance_id.empty()) throw ValidationError("explanation: instance_id must be non-empty");
  std::set<std::string> words;
  for (const auto& w : e.word_items) {
    if (w.word.empty()) throw ValidationError("explanation: empty word");
    if (!std::isfinite(w.score)) throw ValidationError("explanation: non-finite word score");
    if (!words.insert(w.word).second) {
      throw ValidationError("explanation: duplicate word '" + w.word + "'");
    }
  }
  std::set<std::size_t> indices;
  for (const auto& b : e.box_items) {
    if (!std::isfinite(b.score)) throw ValidationError("explanation: non-finite box score");
    if (!indices.insert(b.index).second) {
      throw ValidationError("explanation: duplicate box index " + std::to_string(b.index));
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    validate_box(b.box, inf, inf, "explanation box " + std::to_string(b.index));
  }
  if (instance != nullptr) {
    if (instance->id() != e.instance_id) {
      throw ValidationError("explanation for '" + e.instance_id + "' checked against instance '" +
                            instance->id() + "'");
    }
    for (const auto& b : e.box_items) {
      if (b.index >= instance->box_count()) {
        throw ValidationError("explanation: box index " + std::to_string(b.index) +
                              " out of range for " + std::to_string(instance->box_count()) +
                              " boxes");
      }
      if (!(instance->boxes()[b.index] == b.box)) {
        throw ValidationError("explanation: box " + std::to_string(b.index) +
                              " coordinates differ from the instance");
      }
    }
  }
  if (e.mode != ExplanationMode::random_baseline) {
    // Word ties break by feature index, which the file does not record.
    for (std::size_t i = 1; i < e.word_items.size(); ++i) {
      if (std::abs(e.word_items[i - 1].score) < std::abs(e.word_items[i].score)) {
        throw ValidationError("explanation word_items are not in ranking order");
      }
    }
    check_ranking(e.box_items, [](const BoxItem& b) { return b.index; }, "box_items");
  }
}

ExplainerConfig validate_config(ExplainerConfig config) {
  std::vector<std::string> problems;
  if (config.samples < 1) problems.emplace_back("samples must be >= 1");
  auto prob = [&](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) problems.emplace_back(std::string(name) + " must be in [0, 1]");
  };
  prob(config.p_text, "p_text");
  prob(config.p_visual, "p_visual");
  if (!(config.kernel_width > 0.0) || !std::isfinite(config.kernel_width)) {
    problems.emplace_back("kernel_width must be > 0");
  }
  if (!(config.ridge_lambda >= 0.0) || !std::isfinite(config.ridge_lambda)) {
    problems.emplace_back("ridge_lambda must be >= 0");
  }
  if (config.k_words < 1) problems.emplace_back("k_words must be >= 1");
  if (config.k_boxes < 1) problems.emplace_back("k_boxes must be >= 1");
  if (!std::isfinite(config.mean_std_k)) problems.emplace_back("mean_std_k must be finite");
  if (config.batch_size < 1) problems.emplace_back("batch_size must be >= 1");
  if (config.score_threshold &&
      (!(*config.score_threshold >= 0.0) || !std::isfinite(*config.score_threshold))) {
    problems.emplace_back("score_threshold must be a finite value >= 0");
  }
  try {
    validate_label_set(config.findings);
  } catch (const ValidationError& e) {
    problems.emplace_back(e.what());
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return config;
}

}  // namespace mmsurrogate
