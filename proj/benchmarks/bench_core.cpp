#include <benchmark/benchmark.h>

#include <limits>

#include "blade/analysis.hpp"
#include "blade/candidates.hpp"
#include "blade/evaluation.hpp"
#include "blade/metrics.hpp"
#include "blade/problems.hpp"
#include "blade/rng.hpp"

using namespace blade;

static void BM_EvaluateSbox(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto inst = generate_instance(15, d, 7);
  Rng rng(3);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = rng.uniform(-5.0, 5.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(inst, x));
  }
}
BENCHMARK(BM_EvaluateSbox)->Arg(2)->Arg(5)->Arg(20);

static void BM_EvaluateAffine(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto inst = generate_mabbob_instance({2, 15}, {0.5, 0.5}, d, 7);
  Rng rng(3);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = rng.uniform(-5.0, 5.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(inst, x));
  }
}
BENCHMARK(BM_EvaluateAffine)->Arg(2)->Arg(5)->Arg(20);

static void BM_CmaEsAskTell(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto inst = generate_instance(8, d, 11);
  CmaEsSession session(d, inst.bounds, 13);
  for (auto _ : state) {
    const auto p = session.ask();
    session.tell(evaluate(inst, *p));
  }
}
BENCHMARK(BM_CmaEsAskTell)->Arg(5)->Arg(20);

static void BM_Aocc(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  EvalTrace trace;
  trace.budget = n;
  Rng rng(5);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= n; ++i) {
    const double f = std::pow(10.0, rng.uniform(-9.0, 2.0));
    best = std::min(best, f);
    trace.records.push_back({i, f, best, {}});
  }
  const Budget budget = Budget::evals(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(aocc(trace, budget));
  }
}
BENCHMARK(BM_Aocc)->Arg(1000)->Arg(10000);

static void BM_EloTournament(benchmark::State& state) {
  OutcomeTable outcomes;
  Rng rng(9);
  outcomes.algorithms = {"a", "b", "c", "d", "e", "f"};
  outcomes.metric.resize(6);
  for (auto& row : outcomes.metric)
    for (int i = 0; i < 500; ++i) row.push_back(rng.uniform());
  EloParams params;
  params.n_matches = state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(elo_tournament(outcomes, params));
  }
}
BENCHMARK(BM_EloTournament)->Arg(10000)->Arg(100000);

static void BM_StaticFeatures(benchmark::State& state) {
  std::string source;
  for (int i = 0; i < 200; ++i)
    source += "def step_" + std::to_string(i) + "(x):\n    return x * 0.5 + 1  # halve\n";
  for (auto _ : state) {
    benchmark::DoNotOptimize(static_features(source));
  }
}
BENCHMARK(BM_StaticFeatures);

static void BM_GenerateInstance(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_instance(21, d, ++seed));
  }
}
BENCHMARK(BM_GenerateInstance)->Arg(5)->Arg(20);

BENCHMARK_MAIN();
