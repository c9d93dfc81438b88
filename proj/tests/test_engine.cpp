#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mmsurrogate/errors.hpp"
#include "mmsurrogate/kernel.hpp"
#include "mmsurrogate/perturb.hpp"
#include "mmsurrogate/rng.hpp"
#include "mmsurrogate/surrogate.hpp"
#include "support/support.hpp"

using namespace mmsurrogate;

namespace {

Instance words_instance(std::vector<std::string> words) {
  return Instance::create("w", std::move(words), 10, 10, {{0, 0, 1, 1}}, Matrix(1, 1), {});
}

Matrix column(std::initializer_list<double> values) {
  Matrix m(values.size(), 1);
  std::size_t i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

}  // namespace

// --- rng ---

TEST(Rng, DerivedSeedsDifferByTagAndIndex) {
  EXPECT_NE(derive_seed(1, "text"), derive_seed(1, "visual"));
  EXPECT_NE(derive_seed(1, "text", 0), derive_seed(1, "text", 1));
  EXPECT_EQ(derive_seed(1, "text", 3), derive_seed(1, tag_hash("text"), 3));
}

TEST(Rng, BelowStaysInRange) {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(rng.below(7), 7u);
}

// --- sample_masks ---

TEST(SampleMasks, ZeroProbabilityKeepsEverything) {
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    const auto b = sample_masks(9, 50, 0.0, seed);
    for (auto v : b.data()) EXPECT_EQ(v, 1);
  }
}

TEST(SampleMasks, UnitProbabilityDropsEverythingAfterRowZero) {
  const auto b = sample_masks(9, 50, 1.0, 3);
  for (std::size_t i = 0; i < b.samples(); ++i) {
    for (auto v : b.row(i)) EXPECT_EQ(v, i == 0 ? 1 : 0);
  }
}

TEST(SampleMasks, ZeroFractionWithinBinomialBand) {
  const auto b = sample_masks(100, 10001, 0.5, 12345);
  double zeros = 0;
  for (std::size_t i = 1; i < b.samples(); ++i) {
    for (auto v : b.row(i)) zeros += v == 0;
  }
  const double frac = zeros / (10000.0 * 100.0);
  EXPECT_NEAR(frac, 0.5, 3.0 * std::sqrt(0.25 / (10000.0 * 100.0)));
}

TEST(SampleMasks, SameSeedSameBatch) {
  EXPECT_EQ(sample_masks(12, 40, 0.3, 8), sample_masks(12, 40, 0.3, 8));
  EXPECT_NE(sample_masks(12, 40, 0.3, 8), sample_masks(12, 40, 0.3, 9));
}

TEST(SampleMasks, InvalidArgumentsRejected) {
  EXPECT_THROW(sample_masks(0, 10, 0.5, 1), ArgumentError);
  EXPECT_THROW(sample_masks(3, 0, 0.5, 1), ArgumentError);
  EXPECT_THROW(sample_masks(3, 10, 1.5, 1), ArgumentError);
}

TEST(PerturbationBatch, RowZeroMustBeOnes) {
  EXPECT_THROW(PerturbationBatch(Modality::text, 2, 2, {1, 0, 1, 1}), ArgumentError);
  EXPECT_THROW(PerturbationBatch(Modality::text, 1, 2, {1, 2}), ArgumentError);
}

// --- apply_text_mask ---

TEST(ApplyTextMask, SingleWordMasked) {
  const auto inst = words_instance({"no", "acute", "cardiopulmonary", "findings"});
  const std::vector<std::uint8_t> mask{1, 0, 1, 1};
  EXPECT_EQ(apply_text_mask(inst, mask),
            (std::vector<std::string>{"no", std::string(kMaskedWord), "cardiopulmonary", "findings"}));
}

TEST(ApplyTextMask, RepeatedWordTogglesTogether) {
  const auto inst = words_instance({"the", "heart", "the", "lungs"});
  ASSERT_EQ(inst.unique_words().size(), 3u);
  const std::vector<std::uint8_t> mask{0, 1, 1};
  const std::string m(kMaskedWord);
  EXPECT_EQ(apply_text_mask(inst, mask), (std::vector<std::string>{m, "heart", m, "lungs"}));
}

TEST(ApplyTextMask, AllOnesIsIdentity) {
  const auto inst = words_instance({"a", "b", "a"});
  const std::vector<std::uint8_t> mask{1, 1};
  EXPECT_EQ(apply_text_mask(inst, mask), inst.words());
}

TEST(ApplyTextMask, WrongLengthRejected) {
  const auto inst = words_instance({"a", "b"});
  const std::vector<std::uint8_t> mask{1};
  EXPECT_THROW(apply_text_mask(inst, mask), DimensionError);
}

// --- apply_visual_mask ---

TEST(ApplyVisualMask, AllOnesIsIdentityForEveryStrategy) {
  const auto inst = testsupport::make_instance(4, 6, 5, 2);
  const std::vector<std::uint8_t> ones(6, 1);
  for (auto kind : {InactivationKind::zero, InactivationKind::mean_std, InactivationKind::randomize}) {
    const auto v = apply_visual_mask(inst, ones, {kind, 2.0}, 1);
    EXPECT_EQ(v.boxes, inst.boxes());
    EXPECT_EQ(v.embeddings, inst.embeddings());
  }
}

TEST(ApplyVisualMask, ZeroStrategyClearsOnlyMaskedRow) {
  const auto inst = testsupport::make_instance(4, 2, 3, 2);
  const std::vector<std::uint8_t> mask{1, 0};
  const auto v = apply_visual_mask(inst, mask, {InactivationKind::zero, 2.0}, 1);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(v.embeddings(1, c), 0.0);
    EXPECT_EQ(v.embeddings(0, c), inst.embeddings()(0, c));
  }
  EXPECT_EQ(v.boxes[1], (Box{0, 0, 0, 0}));
  EXPECT_EQ(v.boxes[0], inst.boxes()[0]);
}

TEST(ApplyVisualMask, MeanStdUsesPopulationSpread) {
  Matrix emb(1, 4);
  emb(0, 0) = 1;
  emb(0, 1) = 3;
  emb(0, 2) = 1;
  emb(0, 3) = 3;
  const auto inst = Instance::create("m", {"a"}, 10, 10, {{0, 0, 1, 1}}, emb, {});
  const std::vector<std::uint8_t> mask{0};
  const auto v = apply_visual_mask(inst, mask, {InactivationKind::mean_std, 2.0}, 7);
  // mean 2, population std 1: each element is 2 +/- 2.
  for (std::size_t c = 0; c < 4; ++c) {
    const double x = v.embeddings(0, c);
    EXPECT_TRUE(x == 0.0 || x == 4.0) << x;
  }
}

TEST(ApplyVisualMask, RandomizeStaysWithinRowRange) {
  const auto inst = testsupport::make_instance(4, 5, 16, 3);
  const std::vector<std::uint8_t> mask{0, 0, 0, 0, 0};
  const auto v = apply_visual_mask(inst, mask, {InactivationKind::randomize, 2.0}, 11);
  for (std::size_t r = 0; r < 5; ++r) {
    const auto row = inst.embeddings().row(r);
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    for (double x : v.embeddings.row(r)) {
      EXPECT_GE(x, *lo);
      EXPECT_LE(x, *hi);
    }
  }
}

TEST(ApplyVisualMask, RowDrawDoesNotDependOnOtherRows) {
  const auto inst = testsupport::make_instance(4, 3, 6, 3);
  const std::vector<std::uint8_t> a{1, 0, 1};
  const std::vector<std::uint8_t> b{0, 0, 0};
  const auto va = apply_visual_mask(inst, a, {InactivationKind::mean_std, 2.0}, 5);
  const auto vb = apply_visual_mask(inst, b, {InactivationKind::mean_std, 2.0}, 5);
  for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(va.embeddings(1, c), vb.embeddings(1, c));
}

// --- kernel ---

TEST(CosineDistance, Examples) {
  const std::vector<std::uint8_t> ones{1, 1, 1, 1};
  const std::vector<std::uint8_t> half{1, 1, 0, 0};
  const std::vector<std::uint8_t> none{0, 0, 0, 0};
  EXPECT_EQ(cosine_distance(ones, ones), 0.0);
  EXPECT_NEAR(cosine_distance(ones, half), 1.0 - 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(cosine_distance(ones, half), 0.29289, 1e-5);
  EXPECT_EQ(cosine_distance(ones, none), 1.0);
  EXPECT_THROW(cosine_distance(none, ones), ArgumentError);
  EXPECT_THROW(cosine_distance(ones, std::vector<std::uint8_t>{1, 1}), ArgumentError);
}

TEST(KernelWeight, Examples) {
  EXPECT_EQ(kernel_weight(0.0, 0.25), 1.0);
  const double d = 1.0 - 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(kernel_weight(d, 0.25), std::exp(-d * d / 0.0625), 1e-15);
  EXPECT_NEAR(kernel_weight(d, 0.25), 0.25345, 1e-5);
  EXPECT_NEAR(kernel_weight(1.0, 0.25), 1.1254e-7, 1e-11);
  EXPECT_THROW(kernel_weight(0.1, 0.0), ArgumentError);
}

TEST(KernelWeight, StrictlyDecreasingAndPositive) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    double a = u(gen), b = u(gen);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    const double width = 0.05 + u(gen);
    EXPECT_GT(kernel_weight(a, width), kernel_weight(b, width));
    EXPECT_GT(kernel_weight(b, width), 0.0);
  }
}

TEST(CombineModalWeights, Examples) {
  EXPECT_EQ(combine_modal_weights(1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(combine_modal_weights(0.5, 0.3), 0.4);
  EXPECT_DOUBLE_EQ(combine_modal_weights(0.25345, 1.0), 0.626725);
}

TEST(CombineModalWeights, SymmetricAndMonotone) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(gen), b = u(gen), c = u(gen);
    EXPECT_EQ(combine_modal_weights(a, b), combine_modal_weights(b, a));
    if (a < c) {
      EXPECT_LE(combine_modal_weights(a, b), combine_modal_weights(c, b));
    }
  }
}

TEST(SampleWeights, RowZeroIsOne) {
  const auto b = sample_masks(20, 30, 0.5, 4);
  const auto w = sample_weights(b, 0.25);
  ASSERT_EQ(w.size(), 30u);
  EXPECT_EQ(w[0], 1.0);
  for (double x : w) {
    EXPECT_GT(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(CombineSampleWeights, BothRulesKeepUnperturbedPairAtOne) {
  const std::vector<double> t{1.0, 0.2, 0.9};
  const std::vector<double> v{1.0, 0.6, 0.1};
  const auto h = combine_sample_weights(t, v, WeightCombination::halve);
  const auto m = combine_sample_weights(t, v, WeightCombination::batch_max);
  EXPECT_EQ(h[0], 1.0);
  EXPECT_EQ(m[0], 1.0);
  EXPECT_DOUBLE_EQ(h[1], 0.4);
  EXPECT_DOUBLE_EQ(m[2], 0.5);
}

// --- ridge ---

TEST(Ridge, InterpolatesTwoPoints) {
  const std::vector<double> y{3, 0}, w{1, 1};
  const auto fit = fit_weighted_ridge(column({1, 0}), y, w, 0.0);
  EXPECT_NEAR(fit.coefficients[0], 3.0, 1e-12);
  EXPECT_NEAR(fit.intercept, 0.0, 1e-12);
}

TEST(Ridge, WeightedWithoutIntercept) {
  const std::vector<double> y{2, 0}, w{2, 1};
  const auto fit = fit_weighted_ridge(column({1, 0}), y, w, 0.0, false);
  EXPECT_NEAR(fit.coefficients[0], 2.0, 1e-12);
  EXPECT_EQ(fit.intercept, 0.0);
}

TEST(Ridge, PenaltyShrinks) {
  const std::vector<double> y{3, 0}, w{1, 1};
  const auto fit = fit_weighted_ridge(column({1, 0}), y, w, 1.0, false);
  EXPECT_NEAR(fit.coefficients[0], 1.5, 1e-12);
}

TEST(Ridge, MatchesReferenceOnRandomBinaryDesigns) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t s = 30, f = 1 + gen() % 8;
    Matrix m(s, f);
    std::vector<std::vector<double>> x(s, std::vector<double>(f));
    std::vector<double> y(s), w(s);
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t j = 0; j < f; ++j) m(i, j) = x[i][j] = (i == 0 || u(gen) < 0.5) ? 1.0 : 0.0;
      y[i] = u(gen);
      w[i] = 0.01 + u(gen);
    }
    const auto fit = fit_weighted_ridge(m, y, w, 1.0);
    const auto ref = testsupport::ridge_reference(x, y, w, 1.0, true);
    EXPECT_NEAR(fit.intercept, ref.intercept, 1e-9);
    for (std::size_t j = 0; j < f; ++j) EXPECT_NEAR(fit.coefficients[j], ref.coefficients[j], 1e-9);
  }
}

TEST(Ridge, RejectsBadInput) {
  const std::vector<double> y{1, 2}, w{1, 1}, bad_w{1, 0}, short_y{1};
  EXPECT_THROW(fit_weighted_ridge(column({1, 0}), y, w, -1.0), ArgumentError);
  EXPECT_THROW(fit_weighted_ridge(column({1, 0}), y, bad_w, 1.0), ArgumentError);
  EXPECT_THROW(fit_weighted_ridge(column({1, 0}), short_y, w, 1.0), ArgumentError);
  const std::vector<double> y1{1}, w1{1};
  EXPECT_THROW(fit_weighted_ridge(column({1}), y1, w1, 1.0), ArgumentError);
}

TEST(Ridge, ConstantColumnWithoutPenaltyIsSingular) {
  const std::vector<double> y{1, 2, 3}, w{1, 1, 1};
  EXPECT_THROW(fit_weighted_ridge(column({1, 1, 1}), y, w, 0.0), SingularSystemError);
  EXPECT_NO_THROW(fit_weighted_ridge(column({1, 1, 1}), y, w, 0.1));
}

TEST(RankFeatures, Examples) {
  const std::vector<double> a{0.5, -0.9, 0.1};
  EXPECT_EQ(rank_features(a, 2), (std::vector<RankedFeature>{{1, -0.9}, {0, 0.5}}));
  const std::vector<double> tie{0.2, 0.2};
  EXPECT_EQ(rank_features(tie, 1), (std::vector<RankedFeature>{{0, 0.2}}));
  const auto all = rank_features(a, 10);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[2].index, 2u);
}

TEST(RankFeatures, OrderedByMagnitudeThenIndex) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> c(1 + gen() % 12);
    for (auto& x : c) x = static_cast<double>(static_cast<int>(gen() % 7) - 3) / 2.0;
    const auto r = rank_features(c, c.size());
    for (std::size_t i = 1; i < r.size(); ++i) {
      const double a = std::fabs(r[i - 1].score), b = std::fabs(r[i].score);
      EXPECT_TRUE(a > b || (a == b && r[i - 1].index < r[i].index));
    }
  }
}
