#include <benchmark/benchmark.h>

#include "xdv/classify.hpp"
#include "xdv/dataset.hpp"
#include "xdv/embedding.hpp"
#include "xdv/evalstats.hpp"
#include "xdv/imaging.hpp"
#include "xdv/rng.hpp"
#include "xdv/vectorops.hpp"

using namespace xdv;

namespace {

std::vector<double> random_vector(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(d);
  for (auto& x : v) x = rng.normal();
  return v;
}

const AlignedFace& sample_face() {
  static const AlignedFace face = normalize_geometry(synthesize_dataset(3, 7).front());
  return face;
}

void BM_CrossCorrelation(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(d, 1), b = random_vector(d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(combine(a, b, CombineMethod::CrossCorr));
}
BENCHMARK(BM_CrossCorrelation)->Arg(64)->Arg(2622)->Arg(4096);

void BM_PhaseCorrelation(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(d, 1), b = random_vector(d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(combine(a, b, CombineMethod::PhaseCorr));
}
BENCHMARK(BM_PhaseCorrelation)->Arg(2622)->Arg(4096);

void BM_Geometry(benchmark::State& state) {
  const auto sample = synthesize_dataset(3, 7).front();
  for (auto _ : state) benchmark::DoNotOptimize(normalize_geometry(sample));
}
BENCHMARK(BM_Geometry);

void BM_Enhancement(benchmark::State& state) {
  static const char* tags[] = {"retinex", "ace", "clahe"};
  const auto method = enhancement_of(tags[state.range(0)]);
  state.SetLabel(tags[state.range(0)]);
  for (auto _ : state) benchmark::DoNotOptimize(enhance(sample_face(), method));
}
BENCHMARK(BM_Enhancement)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_Lbp(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(embed_lbp(sample_face()));
}
BENCHMARK(BM_Lbp)->Unit(benchmark::kMillisecond);

void BM_Dct(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(embed_dct(sample_face()));
}
BENCHMARK(BM_Dct)->Unit(benchmark::kMillisecond);

void BM_LinearSvm(benchmark::State& state) {
  const auto n = state.range(0);
  Rng rng(3);
  TrainingSet t;
  t.x.resize(n, 64);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = i % 10 == 0 ? 1 : -1;
    t.y.push_back(y);
    for (Eigen::Index j = 0; j < 64; ++j) t.x(i, j) = rng.normal() + (j < 4 ? 0.8 * y : 0.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(train(ClassifierKind::LinearSvm, t, {0, 0}, 1));
}
BENCHMARK(BM_LinearSvm)->Arg(300)->Arg(900)->Unit(benchmark::kMillisecond);

void BM_EerThreshold(benchmark::State& state) {
  Rng rng(5);
  PairScoreSet s;
  for (int i = 0; i < state.range(0); ++i) s.push_back({rng.normal() + (i % 10 == 0 ? 2.0 : 0.0), i % 10 == 0});
  for (auto _ : state) benchmark::DoNotOptimize(eer_threshold(s));
}
BENCHMARK(BM_EerThreshold)->Arg(100)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
