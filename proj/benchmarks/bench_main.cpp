#include <random>

#include <benchmark/benchmark.h>

#include "pshadow/graph_induction.hpp"
#include "pshadow/prediction_model.hpp"
#include "pshadow/shadow.hpp"

namespace {

using namespace pshadow;

std::vector<SparseVector> random_vectors(std::size_t n, int dim, int nnz, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> a(0, dim - 1), w(1, 5);
  std::vector<SparseVector> out(n);
  for (auto& v : out) {
    std::vector<SparseVector::Entry> e;
    for (int q = 0; q < nnz; ++q) e.push_back({static_cast<AttrId>(a(gen)), double(w(gen))});
    v = SparseVector::from_unsorted(e);
  }
  return out;
}

void BM_InduceKnn(benchmark::State& state) {
  const auto vecs = random_vectors(static_cast<std::size_t>(state.range(0)), 500, 30, 1);
  for (auto _ : state) benchmark::DoNotOptimize(induce_knn(vecs, 20, 1));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_InduceKnn)->RangeMultiplier(2)->Range(250, 2000)->Complexity();

void BM_PredictScore(benchmark::State& state) {
  const std::size_t n = 1000;
  const auto vecs = random_vectors(n, 200, 30, 2);
  std::vector<std::string> names;
  for (int i = 0; i < 200; ++i) names.push_back("a" + std::to_string(i));
  const auto lm = LabelMap::identity(Dictionary(names));
  const auto adj = induce_knn(vecs, static_cast<int>(state.range(0)), 1);
  ModelConfig cfg;
  NodeId i = 0;
  for (auto _ : state) {
    const auto truth = derive_labels(vecs[i], lm);
    benchmark::DoNotOptimize(predict_score(adj, vecs, truth, lm, cfg, {i, 0, 0}));
    i = (i + 1) % n;
  }
}
BENCHMARK(BM_PredictScore)->Arg(5)->Arg(20)->Arg(50);

void BM_PrivacyShadow(benchmark::State& state) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> r(0.0, 100.0);
  std::vector<RankTrajectory> trs(1000);
  for (NodeId i = 0; i < trs.size(); ++i) {
    trs[i].node = i;
    for (int t = 0; t < 60; ++t) trs[i].ranks.push_back(r(gen));
  }
  for (auto _ : state) {
    for (const auto& tr : trs) benchmark::DoNotOptimize(privacy_shadow(tr, 30.0));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trs.size()));
}
BENCHMARK(BM_PrivacyShadow);

}  // namespace

BENCHMARK_MAIN();
