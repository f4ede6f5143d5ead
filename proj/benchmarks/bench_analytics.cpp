#include <benchmark/benchmark.h>

#include "oracles/generators.hpp"
#include "rtc/analytics/cluster.hpp"
#include "rtc/analytics/logistic.hpp"
#include "rtc/analytics/reliability.hpp"
#include "rtc/analytics/reports.hpp"

using namespace rtc;

static void BM_WardClustering(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto blobs = gen::blobs(20, n, 20.0, 1.0, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(agglomerative_cluster(blobs.points, 20, Linkage::ward));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WardClustering)->RangeMultiplier(2)->Range(500, 4000)->Unit(benchmark::kMillisecond)->Complexity();

static void BM_AverageClustering(benchmark::State& state) {
  const auto blobs = gen::blobs(20, static_cast<std::size_t>(state.range(0)), 20.0, 1.0, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(agglomerative_cluster(blobs.points, 20, Linkage::average));
  }
}
BENCHMARK(BM_AverageClustering)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

static void BM_KrippendorffAlpha(benchmark::State& state) {
  Rng rng(3);
  std::vector<std::vector<int>> items(static_cast<std::size_t>(state.range(0)));
  for (auto& item : items) {
    const std::size_t raters = 2 + uniform_index(rng, 2);
    for (std::size_t r = 0; r < raters; ++r) item.push_back(1 + int(uniform_index(rng, 4)));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(krippendorff_alpha(items, AlphaMetric::ordinal));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KrippendorffAlpha)->Arg(1000)->Arg(10000)->Arg(100000);

static void BM_InteractionAnalysis(benchmark::State& state) {
  const auto obs = gen::interaction_sample({}, static_cast<std::size_t>(state.range(0)), 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(interaction_analysis(obs));
  }
}
BENCHMARK(BM_InteractionAnalysis)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

static void BM_LogisticFit(benchmark::State& state) {
  Rng rng(8);
  const std::size_t n = static_cast<std::size_t>(state.range(0)), p = 8;
  DesignMatrix design;
  design.terms.push_back("(intercept)");
  for (std::size_t j = 1; j < p; ++j) design.terms.push_back("x" + std::to_string(j));
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row{1.0};
    double eta = -0.3;
    for (std::size_t j = 1; j < p; ++j) {
      row.push_back(gen::normal(rng));
      eta += 0.2 * row.back();
    }
    design.add_row(row);
    y.push_back(bernoulli(rng, 1.0 / (1.0 + std::exp(-eta))) ? 1 : 0);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_logistic(design, y));
  }
}
BENCHMARK(BM_LogisticFit)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
