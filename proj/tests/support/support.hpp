#pragma once
// Fixtures and independent reference computations shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mmsurrogate/model.hpp"
#include "mmsurrogate/predictor.hpp"

namespace testsupport {

using mmsurrogate::Box;
using mmsurrogate::Instance;
using mmsurrogate::Matrix;

// Uses std::mt19937_64 directly so fixtures do not share code with the engine's RNG.
inline Instance make_instance(std::size_t n_words, std::size_t n_boxes, std::size_t dim,
                              std::uint64_t seed, std::string id = "fx", double size = 512.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n_words; ++i) words.push_back("word" + std::to_string(i));
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < n_boxes; ++i) {
    const double w = 8.0 + std::floor(u(gen) * size / 4.0);
    const double h = 8.0 + std::floor(u(gen) * size / 4.0);
    const double x = std::floor(u(gen) * (size - w));
    const double y = std::floor(u(gen) * (size - h));
    boxes.push_back({x, y, x + w, y + h});
  }
  Matrix emb(n_boxes, dim);
  for (std::size_t r = 0; r < n_boxes; ++r) {
    for (std::size_t c = 0; c < dim; ++c) emb(r, c) = u(gen);
  }
  return Instance::create(std::move(id), words, size, size, boxes, emb, {"nodule"});
}

// k distinct indices in [0, n), sorted.
inline std::vector<std::size_t> pick_distinct(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 gen(seed);
  std::shuffle(idx.begin(), idx.end(), gen);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct HotFixture {
  Instance instance;
  mmsurrogate::SyntheticLogisticModel model;
  std::set<std::string> hot_words;
  std::set<std::size_t> hot_boxes;
};

// A logistic model where only the chosen words and boxes carry weight.
inline HotFixture make_hot_fixture(std::size_t n_words, std::size_t n_boxes, std::size_t hot_words,
                                   std::size_t hot_boxes, double weight, double bias,
                                   std::uint64_t seed) {
  HotFixture fx{make_instance(n_words, n_boxes, 8, seed), {}, {}, {}};
  mmsurrogate::FindingWeights fw;
  fw.bias = bias;
  for (auto i : pick_distinct(n_words, hot_words, seed ^ 0xabcdefULL)) {
    const std::string w = fx.instance.unique_words()[i];
    fw.word_weights[w] = weight;
    fx.hot_words.insert(w);
  }
  for (auto i : pick_distinct(n_boxes, hot_boxes, seed ^ 0x123456ULL)) {
    fw.box_weights[i] = weight;
    fx.hot_boxes.insert(i);
  }
  fx.model.findings["nodule"] = fw;
  return fx;
}

// Ridge reference: forms the augmented normal equations in long double and
// solves them by Gaussian elimination with partial pivoting.
struct RidgeReference {
  std::vector<double> coefficients;
  double intercept = 0.0;
};

inline RidgeReference ridge_reference(const std::vector<std::vector<double>>& x,
                                      const std::vector<double>& y, const std::vector<double>& w,
                                      double lambda, bool intercept) {
  const std::size_t f = x.empty() ? 0 : x[0].size();
  const std::size_t off = intercept ? 1 : 0;
  const std::size_t n = f + off;
  std::vector<std::vector<long double>> a(n, std::vector<long double>(n + 1, 0.0L));
  for (std::size_t s = 0; s < x.size(); ++s) {
    std::vector<long double> row(n);
    if (intercept) row[0] = 1.0L;
    for (std::size_t j = 0; j < f; ++j) row[off + j] = x[s][j];
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) a[r][c] += w[s] * row[r] * row[c];
      a[r][n] += w[s] * row[r] * y[s];
    }
  }
  for (std::size_t j = off; j < n; ++j) a[j][j] += lambda;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const long double m = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= n; ++c) a[r][c] -= m * a[col][c];
    }
  }
  RidgeReference out;
  if (intercept) out.intercept = static_cast<double>(a[0][n] / a[0][0]);
  for (std::size_t j = 0; j < f; ++j) {
    out.coefficients.push_back(static_cast<double>(a[off + j][n] / a[off + j][off + j]));
  }
  return out;
}

// Monte Carlo rasterization of the union: the bounding rectangle is cut into
// a g x g grid (g*g ~ samples) and one uniform point is drawn per cell.
inline double union_area_monte_carlo(const std::vector<Box>& boxes, std::size_t samples,
                                     std::uint64_t seed) {
  if (boxes.empty()) return 0.0;
  double x1 = boxes[0].x1, y1 = boxes[0].y1, x2 = boxes[0].x2, y2 = boxes[0].y2;
  for (const auto& b : boxes) {
    x1 = std::min(x1, b.x1);
    y1 = std::min(y1, b.y1);
    x2 = std::max(x2, b.x2);
    y2 = std::max(y2, b.y2);
  }
  const auto g = static_cast<std::size_t>(std::sqrt(static_cast<double>(samples)));
  const double cw = (x2 - x1) / static_cast<double>(g);
  const double ch = (y2 - y1) / static_cast<double>(g);
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      const double px = x1 + (static_cast<double>(i) + u(gen)) * cw;
      const double py = y1 + (static_cast<double>(j) + u(gen)) * ch;
      for (const auto& b : boxes) {
        if (px >= b.x1 && px < b.x2 && py >= b.y1 && py < b.y2) {
          ++hits;
          break;
        }
      }
    }
  }
  return (x2 - x1) * (y2 - y1) * static_cast<double>(hits) / static_cast<double>(g * g);
}

// Exact expected word IoU of a uniform k-subset of `vocab` against `expert`,
// by enumerating every subset.
inline double enumerate_expected_text_iou(const std::vector<std::string>& vocab,
                                          const std::set<std::string>& expert, std::size_t k) {
  const std::size_t n = vocab.size();
  double total = 0.0;
  std::size_t count = 0;
  for (std::uint64_t bits = 0; bits < (1ULL << n); ++bits) {
    if (static_cast<std::size_t>(__builtin_popcountll(bits)) != k) continue;
    std::set<std::string> pick;
    for (std::size_t i = 0; i < n; ++i) {
      if (bits & (1ULL << i)) pick.insert(vocab[i]);
    }
    std::size_t inter = 0;
    for (const auto& wd : pick) inter += expert.count(wd);
    const std::size_t uni = pick.size() + expert.size() - inter;
    total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    ++count;
  }
  return total / static_cast<double>(count);
}

// Published per-expert similarity scores. Rows: UNITER simultaneous, UNITER
// separate, VisualBERT simultaneous, VisualBERT separate. Columns: expert 1
// text, image, expert 2 text, image, expert 3 text, image.
inline constexpr double kPublishedScores[4][6] = {
    {0.083, 0.119, 0.085, 0.156, 0.096, 0.238},
    {0.103, 0.102, 0.122, 0.172, 0.138, 0.261},
    {0.073, 0.091, 0.079, 0.016, 0.100, 0.261},
    {0.128, 0.102, 0.171, 0.172, 0.117, 0.302},
};
inline constexpr const char* kPublishedModels[4] = {"UNITER", "UNITER", "VisualBERT", "VisualBERT"};
inline constexpr const char* kPublishedModes[4] = {"simultaneous", "separate", "simultaneous",
                                                   "separate"};

}  // namespace testsupport
