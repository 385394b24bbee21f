// Microbenchmarks of the hot paths: one dual-generator evaluation per data point,
// a full lambda search, and one robust training run.

#include <benchmark/benchmark.h>

#include "wdro/dual.hpp"
#include "wdro/dual_objective.hpp"
#include "wdro/risk.hpp"
#include "wdro/rng.hpp"

namespace {

using namespace wdro;

struct Instance {
  SampleSpace space;
  std::shared_ptr<const LossFamily> family;
  Vec theta;
  Dataset data;
};

Instance make_instance(Index d, Index n) {
  Instance in{SampleSpace::ball(Vec::Zero(d), 3.0), logistic_family(d, ThetaSet::annulus(0.1, 10.0)),
              Vec::Zero(d), {}};
  in.theta(0) = 2.0;
  if (d > 1) in.theta(1) = -1.0;
  RngStream rng(17);
  const SampleSpace inner = in.space.shrunk(in.space.margin());
  in.data.points.resize(d, n);
  for (Index i = 0; i < n; ++i) in.data.points.col(i) = inner.sample_uniform(rng);
  return in;
}

void BM_PhiEps0(benchmark::State& state) {
  const Instance in = make_instance(state.range(0), 1);
  const LossModel model(in.family, in.theta);
  const McBudget budget;
  RngStream rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(phi(model, in.space, in.data.point(0), {1.0, 0.0, 1.0}, budget, rng));
  }
}
BENCHMARK(BM_PhiEps0)->Arg(1)->Arg(5)->Arg(10);

void BM_PhiEpsPositive(benchmark::State& state) {
  const Instance in = make_instance(5, 1);
  const LossModel model(in.family, in.theta);
  McBudget budget;
  budget.samples_per_xi = state.range(0);
  RngStream rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(phi(model, in.space, in.data.point(0), {1.0, 0.05, 0.3}, budget, rng));
  }
}
BENCHMARK(BM_PhiEpsPositive)->Arg(128)->Arg(1024);

void BM_RobustRisk(benchmark::State& state) {
  const Instance in = make_instance(5, state.range(0));
  const LossModel model(in.family, in.theta);
  McBudget budget;
  budget.samples_per_xi = 128;
  const double eps = static_cast<double>(state.range(1)) * 1e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(robust_risk(model, in.space, in.data, 0.05, eps, 0.05, budget, 11));
  }
}
BENCHMARK(BM_RobustRisk)->Args({500, 0})->Args({500, 2})->Unit(benchmark::kMillisecond);

void BM_TrainRobust(benchmark::State& state) {
  const Instance in = make_instance(5, state.range(0));
  McBudget budget;
  budget.samples_per_xi = 128;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_robust(in.family, in.space, in.data, 0.05, 0.0, 0.05, in.theta,
                                          budget, OptBudget{}, 11));
  }
}
BENCHMARK(BM_TrainRobust)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
