#include <benchmark/benchmark.h>

#include <vector>

#include "mmsurrogate/eval.hpp"
#include "mmsurrogate/explain.hpp"
#include "mmsurrogate/kernel.hpp"
#include "mmsurrogate/perturb.hpp"
#include "mmsurrogate/predictor.hpp"
#include "mmsurrogate/rng.hpp"
#include "mmsurrogate/surrogate.hpp"

using namespace mmsurrogate;

namespace {

Instance make_instance(std::size_t words, std::size_t boxes, std::size_t dim) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < words; ++i) w.push_back("w" + std::to_string(i));
  Rng rng(11);
  std::vector<Box> b;
  for (std::size_t i = 0; i < boxes; ++i) {
    const double x = rng.uniform(0, 400), y = rng.uniform(0, 400);
    b.push_back({x, y, x + rng.uniform(10, 100), y + rng.uniform(10, 100)});
  }
  Matrix emb(boxes, dim);
  for (std::size_t r = 0; r < boxes; ++r) {
    for (std::size_t c = 0; c < dim; ++c) emb(r, c) = rng.uniform();
  }
  return Instance::create("bench", w, 512, 512, b, emb, {"nodule"});
}

SyntheticLogisticModel make_model() {
  FindingWeights fw;
  fw.bias = -2.0;
  fw.word_weights = {{"w1", 2.0}, {"w5", 2.0}, {"w9", 2.0}};
  fw.box_weights = {{3, 2.0}, {17, 2.0}, {30, 2.0}};
  SyntheticLogisticModel m;
  m.findings["nodule"] = fw;
  return m;
}

}  // namespace

static void BM_SampleMasks(benchmark::State& state) {
  const auto samples = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto batch = sample_masks(36, samples, 0.5, 42);
    benchmark::DoNotOptimize(batch.data().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleMasks)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_RidgeFit(benchmark::State& state) {
  const auto samples = static_cast<std::size_t>(state.range(0));
  const auto features = static_cast<std::size_t>(state.range(1));
  Rng rng(5);
  Matrix design(samples, features);
  std::vector<double> y(samples), w(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t j = 0; j < features; ++j) design(i, j) = rng.uniform() < 0.5 ? 0.0 : 1.0;
    y[i] = rng.uniform();
    w[i] = rng.uniform(0.1, 1.0);
  }
  for (auto _ : state) {
    auto fit = fit_weighted_ridge(design, y, w, 1.0);
    benchmark::DoNotOptimize(fit.intercept);
  }
}
BENCHMARK(BM_RidgeFit)->Args({1000, 20})->Args({1000, 56})->Args({10000, 56});

static void BM_UnionArea(benchmark::State& state) {
  Rng rng(3);
  std::vector<Box> boxes;
  for (int i = 0; i < state.range(0); ++i) {
    const double x = rng.uniform(0, 900), y = rng.uniform(0, 900);
    boxes.push_back({x, y, x + rng.uniform(1, 100), y + rng.uniform(1, 100)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(region_union_area(boxes));
}
BENCHMARK(BM_UnionArea)->Arg(3)->Arg(10)->Arg(36)->Arg(200);

static void BM_ExplainSeparate(benchmark::State& state) {
  const Instance instance = make_instance(20, 36, 8);
  SyntheticPredictor predictor(make_model());
  ExplainerConfig config;
  config.samples = static_cast<std::size_t>(state.range(0));
  config.k_words = 3;
  config.k_boxes = 3;
  for (auto _ : state) {
    auto e = explain_separate(instance, "nodule", predictor, config);
    benchmark::DoNotOptimize(e.word_items.data());
  }
}
BENCHMARK(BM_ExplainSeparate)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
