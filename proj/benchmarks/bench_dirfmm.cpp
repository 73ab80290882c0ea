#include <benchmark/benchmark.h>

#include <cmath>
#include <map>

#include "dirfmm/curve.hpp"
#include "dirfmm/driver.hpp"
#include "dirfmm/kernel.hpp"
#include "dirfmm/lowrank.hpp"

using namespace dirfmm;

namespace {

const RepTable &table(double K, double eps) {
  static std::map<std::pair<double, double>, RepTable> cache;
  auto it = cache.find({K, eps});
  if (it == cache.end()) it = cache.emplace(std::make_pair(K, eps), RepTable::build(K, eps, 1)).first;
  return it->second;
}

void BM_Hankel01(benchmark::State &state) {
  const auto acc = state.range(0) ? KernelAccuracy::fast : KernelAccuracy::precise;
  std::vector<double> xs(1024);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = std::pow(10.0, -2.0 + 5.0 * i / xs.size());
  Complex h0, h1;
  for (auto _ : state)
    for (double x : xs) {
      hankel01(x, h0, h1, acc);
      benchmark::DoNotOptimize(h0);
      benchmark::DoNotOptimize(h1);
    }
  state.SetItemsProcessed(state.iterations() * xs.size());
}
BENCHMARK(BM_Hankel01)->Arg(0)->Arg(1);

void BM_BuildRep(benchmark::State &state) {
  const double w = static_cast<double>(state.range(0));
  const double eps = std::pow(10.0, -static_cast<double>(state.range(1)));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    Rng rng(seed++);
    benchmark::DoNotOptimize(build_rep(w, 0, 1024, eps, rng));
  }
}
BENCHMARK(BM_BuildRep)->Args({1, 4})->Args({4, 4})->Args({16, 4})->Args({4, 8})->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State &state) {
  const double K = static_cast<double>(state.range(0));
  NBodyProblem p;
  p.K = K;
  p.eps = 1e-4;
  Rng rng(mix_seed(1, static_cast<std::uint64_t>(K)));
  p.points = sample_curve(make_curve(CurveKind::circle, K), 20.0, rng);
  p.charges = random_charges(p.points.size(), rng);
  const RepTable &reps = table(K, p.eps);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(p, reps, {.threads = 1}));
  state.counters["N"] = static_cast<double>(p.points.size());
}
BENCHMARK(BM_Evaluate)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
