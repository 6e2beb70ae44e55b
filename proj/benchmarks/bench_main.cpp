// Micro benchmarks for the hot paths of one PBO iteration.

#include "pbo/acquisition.hpp"
#include "pbo/bench.hpp"
#include "pbo/simulation.hpp"

#include <benchmark/benchmark.h>

using namespace pbo;

namespace {

PreferenceDataset hartmann_data(int n, int q) {
  const TestProblem p = make_problem("hartmann6");
  SimulatedDM dm(p.utility, 0.1, 1);
  Rng rng(2);
  PreferenceDataset ds(q);
  for (int i = 0; i < n; ++i) {
    Query X;
    for (int j = 0; j < q; ++j) X.points.push_back(p.domain.sample(rng));
    ds = ds.appended(X, simulate_response(dm, X));
  }
  return ds;
}

PosteriorModel hartmann_model(int n, int q) {
  return fit_laplace(hartmann_data(n, q), Hyperparameters::defaults(make_problem("hartmann6").domain));
}

void BM_LaplaceFit(benchmark::State& state) {
  const auto ds = hartmann_data(static_cast<int>(state.range(0)), 2);
  const auto h = Hyperparameters::defaults(make_problem("hartmann6").domain);
  for (auto _ : state) benchmark::DoNotOptimize(fit_laplace(ds, h).log_marginal_likelihood());
}
BENCHMARK(BM_LaplaceFit)->Arg(24)->Arg(74)->Arg(174)->Unit(benchmark::kMillisecond);

void BM_HyperparameterFit(benchmark::State& state) {
  const auto ds = hartmann_data(static_cast<int>(state.range(0)), 2);
  HyperFitConfig cfg = HyperFitConfig::defaults(make_problem("hartmann6").domain);
  cfg.restarts = 1;
  cfg.max_evaluations = 100;
  for (auto _ : state) benchmark::DoNotOptimize(fit_hyperparameters(ds, cfg).noise_level);
}
BENCHMARK(BM_HyperparameterFit)->Arg(24)->Arg(74)->Unit(benchmark::kMillisecond);

void BM_QeuboValue(benchmark::State& state) {
  const int q = static_cast<int>(state.range(0));
  const auto m = hartmann_model(64, q);
  Rng rng(3);
  const auto base = BaseSampleSet::draw(128, q, rng);
  const Query X = random_query(make_problem("hartmann6").domain, q, rng);
  for (auto _ : state) benchmark::DoNotOptimize(qeubo_value(m, X, base));
}
BENCHMARK(BM_QeuboValue)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_QeuboValueAndGradient(benchmark::State& state) {
  const int q = static_cast<int>(state.range(0));
  const auto m = hartmann_model(64, q);
  Rng rng(4);
  const auto base = BaseSampleSet::draw(128, q, rng);
  const Query X = random_query(make_problem("hartmann6").domain, q, rng);
  std::vector<Eigen::VectorXd> g;
  for (auto _ : state) benchmark::DoNotOptimize(saa_value(m, X, base, nullptr, &g));
}
BENCHMARK(BM_QeuboValueAndGradient)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_OptimizeAcquisition(benchmark::State& state) {
  const auto m = hartmann_model(64, 2);
  AcquisitionSpec spec;
  spec.kind = state.range(0) == 0 ? AcquisitionKind::Qeubo : AcquisitionKind::Qei;
  const Domain d = make_problem("hartmann6").domain;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    Rng rng(seed++);
    benchmark::DoNotOptimize(optimize_acquisition(m, spec, d, m.dataset(), rng));
  }
}
BENCHMARK(BM_OptimizeAcquisition)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ThompsonQuery(benchmark::State& state) {
  const auto m = hartmann_model(64, 2);
  const Domain d = make_problem("hartmann6").domain;
  Rng rng(5);
  const auto cands = thompson_candidates(d, m.dataset(), 1024, rng);
  for (auto _ : state) benchmark::DoNotOptimize(thompson_query(m, 2, cands, rng));
}
BENCHMARK(BM_ThompsonQuery)->Unit(benchmark::kMillisecond);

void BM_Recommend(benchmark::State& state) {
  const auto m = hartmann_model(64, 2);
  const Domain d = make_problem("hartmann6").domain;
  Rng rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(recommend(m, d, rng));
}
BENCHMARK(BM_Recommend)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
