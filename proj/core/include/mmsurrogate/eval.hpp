#pragma once
// Agreement metrics between explanations and expert annotations: word-set IoU,
// region IoU over unions of boxes, inter-annotator agreement, the random
// baseline and aggregate roll-ups.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mmsurrogate/model.hpp"

namespace mmsurrogate {

// |A n B| / |A u B|; 1.0 when both are empty.
double text_similarity(const std::set<std::string>& a, const std::set<std::string>& b);

// Exact area of the union of rectangles (coordinate compression).
double region_union_area(std::span<const Box> boxes);

// Exact area of (union of a) n (union of b).
double region_intersection_area(std::span<const Box> a, std::span<const Box> b);

// area(Ra n Rb) / area(Ra u Rb) over the union regions of each side.
// 1.0 when both sides are empty, 0.0 when exactly one is.
double image_similarity(std::span<const Box> a, std::span<const Box> b);

// Common view over explanations and annotations for pairwise scoring.
struct ExplanationLike {
  std::string instance_id;
  std::string finding;
  std::string source;
  std::set<std::string> words;
  std::vector<Box> boxes;
  // Grouping tags: "mode", "predictor", "annotator".
  std::map<std::string, std::string> tags;

  static ExplanationLike from(const Explanation& explanation);
  static ExplanationLike from(const ExpertAnnotation& annotation, std::string finding = {});
};

struct SimilarityReport {
  std::string instance_id;
  std::string finding;
  double text_iou = 0.0;
  double image_iou = 0.0;
  std::string left_source;
  std::string right_source;
  std::map<std::string, std::string> tags;

  bool operator==(const SimilarityReport&) const = default;
};

// Symmetric in its arguments (sources aside). Throws ArgumentError when the
// instance ids differ.
SimilarityReport evaluate_pair(const ExplanationLike& a, const ExplanationLike& b);

struct AggregateReport {
  std::map<std::string, std::string> keys;
  double mean_text_iou = 0.0;
  double mean_image_iou = 0.0;
  std::size_t count = 0;

  bool operator==(const AggregateReport&) const = default;
};

// Arithmetic means per group. Group keys are looked up in each report's tags,
// except "instance" and "finding" which read the report fields. An empty key
// list yields a single overall group. Groups come out in key order.
// Throws ArgumentError on empty input.
std::vector<AggregateReport> aggregate(std::span<const SimilarityReport> reports,
                                       std::span<const std::string> group_by);

struct AgreementResult {
  // One entry per unordered annotator pair with keys annotator_a < annotator_b.
  std::vector<AggregateReport> pairs;
  std::vector<SimilarityReport> details;
  std::vector<std::string> warnings;
};

// Pairs annotations on (instance_id, finding_context). No overlap is not an
// error: the result is empty with a warning.
AgreementResult inter_annotator_agreement(std::span<const ExpertAnnotation> annotations);

struct BaselineResult {
  // Trial-averaged similarity per annotation.
  std::vector<SimilarityReport> pair_means;
  std::vector<AggregateReport> per_annotator;
  std::optional<AggregateReport> overall;
  // Annotations that could not be scored, with the reason.
  std::vector<std::string> skipped;
};

// For every annotation whose instance is known, averages the similarity of
// `trials` random explanations against it.
BaselineResult baseline_run(std::span<const Instance> instances,
                            std::span<const ExpertAnnotation> annotations, std::size_t k_words,
                            std::size_t k_boxes, std::size_t trials, std::uint64_t seed,
                            std::size_t jobs = 1);

// Aligned plain-text table; columns are the union of group keys, then the two
// means and the count.
std::string format_table(std::span<const AggregateReport> reports, const std::string& title);

}  // namespace mmsurrogate
