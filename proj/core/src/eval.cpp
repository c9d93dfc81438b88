#include "mmsurrogate/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "mmsurrogate/explain.hpp"
#include "mmsurrogate/rng.hpp"

namespace mmsurrogate {

double text_similarity(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& w : a) common += b.count(w);
  const std::size_t uni = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

namespace {

void check_boxes(std::span<const Box> boxes) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (const auto& b : boxes) validate_box(b, inf, inf);
}

// Cells of the grid cut by every box edge; each cell is either fully inside
// or fully outside any box.
struct Grid {
  std::vector<double> xs;
  std::vector<double> ys;

  explicit Grid(std::initializer_list<std::span<const Box>> sides) {
    for (const auto side : sides) {
      for (const auto& b : side) {
        xs.push_back(b.x1);
        xs.push_back(b.x2);
        ys.push_back(b.y1);
        ys.push_back(b.y2);
      }
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  }

  std::size_t nx() const { return xs.empty() ? 0 : xs.size() - 1; }
  std::size_t ny() const { return ys.empty() ? 0 : ys.size() - 1; }

  std::vector<std::uint8_t> coverage(std::span<const Box> boxes) const {
    std::vector<std::uint8_t> cov(nx() * ny(), 0);
    for (const auto& b : boxes) {
      const auto i0 = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), b.x1) - xs.begin());
      const auto i1 = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), b.x2) - xs.begin());
      const auto j0 = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), b.y1) - ys.begin());
      const auto j1 = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), b.y2) - ys.begin());
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) cov[i * ny() + j] = 1;
      }
    }
    return cov;
  }

  double cell_area(std::size_t i, std::size_t j) const {
    return (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
  }
};

}  // namespace

double region_union_area(std::span<const Box> boxes) {
  check_boxes(boxes);
  if (boxes.empty()) return 0.0;
  const Grid grid({boxes});
  const auto cov = grid.coverage(boxes);
  double area = 0.0;
  for (std::size_t i = 0; i < grid.nx(); ++i) {
    for (std::size_t j = 0; j < grid.ny(); ++j) {
      if (cov[i * grid.ny() + j]) area += grid.cell_area(i, j);
    }
  }
  return area;
}

double region_intersection_area(std::span<const Box> a, std::span<const Box> b) {
  check_boxes(a);
  check_boxes(b);
  if (a.empty() || b.empty()) return 0.0;
  const Grid grid({a, b});
  const auto ca = grid.coverage(a);
  const auto cb = grid.coverage(b);
  double area = 0.0;
  for (std::size_t i = 0; i < grid.nx(); ++i) {
    for (std::size_t j = 0; j < grid.ny(); ++j) {
      const std::size_t c = i * grid.ny() + j;
      if (ca[c] && cb[c]) area += grid.cell_area(i, j);
    }
  }
  return area;
}

double image_similarity(std::span<const Box> a, std::span<const Box> b) {
  check_boxes(a);
  check_boxes(b);
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const Grid grid({a, b});
  const auto ca = grid.coverage(a);
  const auto cb = grid.coverage(b);
  double inter = 0.0;
  double uni = 0.0;
  for (std::size_t i = 0; i < grid.nx(); ++i) {
    for (std::size_t j = 0; j < grid.ny(); ++j) {
      const std::size_t c = i * grid.ny() + j;
      const double area = grid.cell_area(i, j);
      if (ca[c] && cb[c]) inter += area;
      if (ca[c] || cb[c]) uni += area;
    }
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

ExplanationLike ExplanationLike::from(const Explanation& e) {
  ExplanationLike x;
  x.instance_id = e.instance_id;
  x.finding = e.finding;
  x.source = std::string(to_string(e.mode));
  for (const auto& w : e.word_items) x.words.insert(w.word);
  for (const auto& b : e.box_items) x.boxes.push_back(b.box);
  x.tags["mode"] = x.source;
  x.tags["predictor"] = e.provenance.predictor;
  return x;
}

ExplanationLike ExplanationLike::from(const ExpertAnnotation& a, std::string finding) {
  ExplanationLike x;
  x.instance_id = a.instance_id;
  x.finding = std::move(finding);
  x.source = a.annotator_id;
  x.words = a.words;
  x.boxes = a.boxes;
  x.tags["annotator"] = a.annotator_id;
  return x;
}

SimilarityReport evaluate_pair(const ExplanationLike& a, const ExplanationLike& b) {
  if (a.instance_id != b.instance_id) {
    throw ArgumentError("evaluate_pair: instance '" + a.instance_id + "' vs '" + b.instance_id + "'");
  }
  SimilarityReport r;
  r.instance_id = a.instance_id;
  r.finding = a.finding.empty() ? b.finding : a.finding;
  r.text_iou = text_similarity(a.words, b.words);
  r.image_iou = image_similarity(a.boxes, b.boxes);
  r.left_source = a.source;
  r.right_source = b.source;
  r.tags = a.tags;
  for (const auto& [k, v] : b.tags) r.tags.emplace(k, v);
  return r;
}

std::vector<AggregateReport> aggregate(std::span<const SimilarityReport> reports,
                                       std::span<const std::string> group_by) {
  if (reports.empty()) throw ArgumentError("aggregate: no reports");
  struct Sums {
    double text = 0.0;
    double image = 0.0;
    std::size_t count = 0;
  };
  std::map<std::map<std::string, std::string>, Sums> groups;
  for (const auto& r : reports) {
    std::map<std::string, std::string> key;
    for (const auto& k : group_by) {
      if (k == "instance") {
        key[k] = r.instance_id;
      } else if (k == "finding") {
        key[k] = r.finding;
      } else {
        const auto it = r.tags.find(k);
        key[k] = it == r.tags.end() ? std::string() : it->second;
      }
    }
    auto& s = groups[key];
    s.text += r.text_iou;
    s.image += r.image_iou;
    ++s.count;
  }
  std::vector<AggregateReport> out;
  out.reserve(groups.size());
  for (const auto& [key, s] : groups) {
    const double n = static_cast<double>(s.count);
    out.push_back({key, s.text / n, s.image / n, s.count});
  }
  return out;
}

namespace {

std::string context_key(const std::set<std::string>& context) {
  std::string k;
  for (const auto& c : context) k += (k.empty() ? "" : ",") + c;
  return k;
}

}  // namespace

AgreementResult inter_annotator_agreement(std::span<const ExpertAnnotation> annotations) {
  AgreementResult result;
  // annotator -> (instance, context) -> annotation
  std::map<std::string, std::map<std::pair<std::string, std::string>, const ExpertAnnotation*>> by;
  for (const auto& a : annotations) {
    auto& slot = by[a.annotator_id][{a.instance_id, context_key(a.finding_context)}];
    if (slot != nullptr) {
      result.warnings.push_back("annotator '" + a.annotator_id + "' annotated '" + a.instance_id +
                                "' [" + context_key(a.finding_context) +
                                "] more than once; using the first");
      continue;
    }
    slot = &a;
  }
  for (auto ia = by.begin(); ia != by.end(); ++ia) {
    for (auto ib = std::next(ia); ib != by.end(); ++ib) {
      std::vector<SimilarityReport> pair_reports;
      for (const auto& [key, a] : ia->second) {
        const auto it = ib->second.find(key);
        if (it == ib->second.end()) continue;
        auto r = evaluate_pair(ExplanationLike::from(*a, key.second),
                               ExplanationLike::from(*it->second, key.second));
        r.tags.erase("annotator");
        r.tags["annotator_a"] = ia->first;
        r.tags["annotator_b"] = ib->first;
        pair_reports.push_back(r);
      }
      if (pair_reports.empty()) continue;
      const std::vector<std::string> keys{"annotator_a", "annotator_b"};
      auto agg = aggregate(pair_reports, keys);
      result.pairs.insert(result.pairs.end(), agg.begin(), agg.end());
      result.details.insert(result.details.end(), pair_reports.begin(), pair_reports.end());
    }
  }
  if (result.pairs.empty()) {
    result.warnings.emplace_back(
        "no two annotators share an annotated (instance, finding context); agreement is empty");
  }
  return result;
}

BaselineResult baseline_run(std::span<const Instance> instances,
                            std::span<const ExpertAnnotation> annotations, std::size_t k_words,
                            std::size_t k_boxes, std::size_t trials, std::uint64_t seed,
                            std::size_t jobs) {
  if (trials < 1) throw ArgumentError("baseline_run: trials must be >= 1");
  std::map<std::string, const Instance*> index;
  for (const auto& inst : instances) index.emplace(inst.id(), &inst);

  const std::size_t n = annotations.size();
  std::vector<std::optional<SimilarityReport>> means(n);
  std::vector<std::string> reasons(n);

  auto score = [&](std::size_t i) {
    const auto& a = annotations[i];
    const auto it = index.find(a.instance_id);
    if (it == index.end()) {
      reasons[i] = "annotation by '" + a.annotator_id + "': unknown instance '" + a.instance_id + "'";
      return;
    }
    const Instance& inst = *it->second;
    const std::string finding = a.finding_context.empty() ? std::string() : *a.finding_context.begin();
    const auto expert = ExplanationLike::from(a, finding);
    // Stream per annotation so results do not depend on scheduling.
    const std::uint64_t stream =
        derive_seed(seed, tag_hash(a.annotator_id + "\x1f" + a.instance_id + "\x1f" +
                                   context_key(a.finding_context)), i);
    double text = 0.0;
    double image = 0.0;
    try {
      a.validate_against(inst);
      for (std::size_t t = 0; t < trials; ++t) {
        const auto r = evaluate_pair(
            ExplanationLike::from(random_explanation(inst, finding, k_words, k_boxes, derive_seed(stream, "trial", t))),
            expert);
        text += r.text_iou;
        image += r.image_iou;
      }
    } catch (const Error& e) {
      reasons[i] = "instance '" + a.instance_id + "': " + e.what();
      return;
    }
    SimilarityReport r;
    r.instance_id = a.instance_id;
    r.finding = finding;
    r.text_iou = text / static_cast<double>(trials);
    r.image_iou = image / static_cast<double>(trials);
    r.left_source = std::string(to_string(ExplanationMode::random_baseline));
    r.right_source = a.annotator_id;
    r.tags = {{"mode", r.left_source}, {"annotator", a.annotator_id}};
    means[i] = r;
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) score(i);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) score(i);
      });
    }
  }

  BaselineResult result;
  for (std::size_t i = 0; i < n; ++i) {
    if (means[i]) {
      result.pair_means.push_back(*means[i]);
    } else {
      result.skipped.push_back(reasons[i]);
    }
  }
  if (!result.pair_means.empty()) {
    const std::vector<std::string> by_annotator{"annotator"};
    result.per_annotator = aggregate(result.pair_means, by_annotator);
    result.overall = aggregate(result.pair_means, {}).front();
  }
  return result;
}

std::string format_table(std::span<const AggregateReport> reports, const std::string& title) {
  std::vector<std::string> keys;
  for (const auto& r : reports) {
    for (const auto& [k, v] : r.keys) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
  }
  std::vector<std::string> header = keys;
  header.insert(header.end(), {"Text Similarity", "Image Similarity", "Count"});
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    std::vector<std::string> row;
    for (const auto& k : keys) {
      const auto it = r.keys.find(k);
      row.push_back(it == r.keys.end() ? "" : it->second);
    }
    std::ostringstream t, i;
    t << std::fixed << std::setprecision(3) << r.mean_text_iou;
    i << std::fixed << std::setprecision(3) << r.mean_image_iou;
    row.push_back(t.str());
    row.push_back(i.str());
    row.push_back(std::to_string(r.count));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  out << title << "\n";
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const bool numeric = c >= keys.size();
      out << (c == 0 ? "" : "  ");
      if (numeric) {
        out << std::setw(static_cast<int>(width[c])) << std::right << row[c];
      } else {
        out << std::setw(static_cast<int>(width[c])) << std::left << row[c];
      }
    }
    out << "\n";
  };
  emit(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << "\n";
  for (const auto& row : rows) emit(row);
  return out.str();
}

}  // namespace mmsurrogate
