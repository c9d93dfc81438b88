#pragma once
// Domain types shared by every stage of the explainer: instances, expert
// annotations, explanations and the explainer configuration.
//
// Every type validates itself at construction, so a value that exists is a
// value that satisfies its invariants.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmsurrogate/errors.hpp"

namespace mmsurrogate {

inline constexpr int kFormatVersion = 1;

// Axis-aligned box in image pixel coordinates.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }

  bool operator==(const Box&) const = default;
};

// Checks 0 <= x1 < x2 <= width and 0 <= y1 < y2 <= height. Pass infinite
// bounds to check only ordering and non-negativity.
void validate_box(const Box& box, double image_width, double image_height,
                  std::string_view context = {});

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Lowercases ASCII letters and removes ASCII punctuation. Idempotent.
std::string normalize_word(std::string_view word);

// Default finding labels: atelectasis, cardiomegaly, nodule.
const std::vector<std::string>& default_findings();

// Throws ValidationError if the label set is empty or has duplicates.
void validate_label_set(std::span<const std::string> labels);

// One vision+language data point. Immutable after construction.
class Instance {
 public:
  // Normalizes words and validates every invariant; throws ValidationError or
  // DimensionError.
  static Instance create(std::string id, std::vector<std::string> words, double image_width,
                         double image_height, std::vector<Box> boxes, Matrix embeddings,
                         std::vector<std::string> gold_findings);

  const std::string& id() const noexcept { return id_; }
  const std::vector<std::string>& words() const noexcept { return words_; }
  double image_width() const noexcept { return image_width_; }
  double image_height() const noexcept { return image_height_; }
  const std::vector<Box>& boxes() const noexcept { return boxes_; }
  const Matrix& embeddings() const noexcept { return embeddings_; }
  const std::vector<std::string>& gold_findings() const noexcept { return gold_findings_; }

  std::size_t box_count() const noexcept { return boxes_.size(); }
  std::size_t embedding_dim() const noexcept { return embeddings_.cols(); }

  // Text features: unique words in first-occurrence order.
  const std::vector<std::string>& unique_words() const noexcept { return unique_words_; }

  bool operator==(const Instance&) const = default;

 private:
  Instance() = default;

  std::string id_;
  std::vector<std::string> words_;
  double image_width_ = 0.0;
  double image_height_ = 0.0;
  std::vector<Box> boxes_;
  Matrix embeddings_;
  std::vector<std::string> gold_findings_;
  std::vector<std::string> unique_words_;
};

// One annotator's highlighted words and drawn boxes for an instance.
struct ExpertAnnotation {
  std::string annotator_id;
  std::string instance_id;
  std::set<std::string> finding_context;
  std::set<std::string> words;
  std::vector<Box> boxes;

  // Lowercases words and validates box ordering. Image bounds are checked
  // against an instance with validate_against().
  static ExpertAnnotation create(std::string annotator_id, std::string instance_id,
                                 std::set<std::string> finding_context,
                                 std::vector<std::string> words, std::vector<Box> boxes);

  void validate_against(const Instance& instance) const;

  bool operator==(const ExpertAnnotation&) const = default;
};

enum class InactivationKind { zero, mean_std, randomize };

std::string_view to_string(InactivationKind kind) noexcept;
InactivationKind parse_inactivation_kind(std::string_view name);

enum class ExplanationMode { separate, simultaneous, random_baseline };

std::string_view to_string(ExplanationMode mode) noexcept;
ExplanationMode parse_explanation_mode(std::string_view name);

enum class RegressionTarget { probability, loss };

std::string_view to_string(RegressionTarget target) noexcept;
RegressionTarget parse_regression_target(std::string_view name);

struct WordItem {
  std::string word;
  double score = 0.0;

  bool operator==(const WordItem&) const = default;
};

struct BoxItem {
  std::size_t index = 0;
  Box box;
  double score = 0.0;

  bool operator==(const BoxItem&) const = default;
};

// Everything needed to reproduce an explanation with the same build.
struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t text_seed = 0;
  std::uint64_t visual_seed = 0;
  std::size_t samples = 0;
  double p_text = 0.0;
  double p_visual = 0.0;
  double kernel_width = 0.0;
  double ridge_lambda = 0.0;
  InactivationKind strategy = InactivationKind::zero;
  double mean_std_k = 2.0;
  RegressionTarget target = RegressionTarget::probability;
  std::string predictor;

  bool operator==(const Provenance&) const = default;
};

struct Explanation {
  std::string instance_id;
  std::string finding;
  ExplanationMode mode = ExplanationMode::separate;
  std::vector<WordItem> word_items;
  std::vector<BoxItem> box_items;
  Provenance provenance;
  // Predicted probability of the finding on the unperturbed input.
  std::optional<double> original_probability;

  bool operator==(const Explanation&) const = default;
};

// Distinct words, distinct box indices, and (for non-random modes) ranking in
// descending |score| order with ascending-index tie breaks. When an instance is
// given, box indices and coordinates are checked against it.
void validate_explanation(const Explanation& explanation, const Instance* instance = nullptr);

struct ExplainerConfig {
  std::size_t samples = 1000;
  double p_text = 0.5;
  double p_visual = 0.5;
  double kernel_width = 0.25;
  double ridge_lambda = 1.0;
  std::size_t k_words = 5;
  std::size_t k_boxes = 3;
  InactivationKind inactivation = InactivationKind::zero;
  double mean_std_k = 2.0;
  std::uint64_t seed = 0;
  RegressionTarget target = RegressionTarget::probability;
  std::size_t batch_size = 32;
  // Off by default: outputs are always the top k.
  std::optional<double> score_threshold;
  std::vector<std::string> findings = default_findings();

  bool operator==(const ExplainerConfig&) const = default;
};

// Returns the config unchanged; throws ConfigError listing every violated bound.
ExplainerConfig validate_config(ExplainerConfig config);

}  // namespace mmsurrogate
