#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "blade/metrics.hpp"
#include "blade/rng.hpp"

using namespace blade;

namespace {

// Stub trace whose best-so-far error sequence is given directly (f_opt = 0).
EvalTrace trace_from_errors(const std::vector<double>& errors) {
  EvalTrace t;
  t.candidate_id = "stub";
  t.instance_id = "stub";
  t.f_opt = 0.0;
  t.status = RunStatus::BudgetExhausted;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < errors.size(); ++i) {
    best = std::min(best, errors[i]);
    t.records.push_back({static_cast<int>(i) + 1, errors[i], best, {}});
  }
  t.budget = static_cast<int>(errors.size());
  return t;
}

// Two-sided Welch p rebuilt from first principles: Welch statistic, then the
// t density integrated with Simpson's rule out to a far tail.
double welch_p_by_quadrature(const std::vector<double>& a, const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& xs) {
    double s = 0;
    for (double v : xs) s += v;
    return s / xs.size();
  };
  auto var = [&](const std::vector<double>& xs, double m) {
    double s = 0;
    for (double v : xs) s += (v - m) * (v - m);
    return s / (xs.size() - 1);
  };
  const double ma = mean(a), mb = mean(b);
  const double va = var(a, ma), vb = var(b, mb);
  const double na = a.size(), nb = b.size();
  const double se2 = va / na + vb / nb;
  const double t = std::abs((ma - mb) / std::sqrt(se2));
  const double df = se2 * se2 /
                    ((va / na) * (va / na) / (na - 1) + (vb / nb) * (vb / nb) / (nb - 1));

  auto pdf = [&](double x) {
    const double log_norm = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) -
                            0.5 * std::log(df * std::acos(-1.0));
    return std::exp(log_norm - (df + 1) / 2 * std::log1p(x * x / df));
  };
  // integrate pdf on [t, t + 400] with Simpson; the remaining tail is
  // far below the 1e-6 comparison tolerance
  const int n = 200000;
  const double hi = t + 400.0;
  const double h = (hi - t) / n;
  double s = pdf(t) + pdf(hi);
  for (int i = 1; i < n; ++i) s += pdf(t + i * h) * (i % 2 ? 4.0 : 2.0);
  return 2.0 * s * h / 3.0;
}

}  // namespace

TEST_CASE("aocc substitution fixtures are exact") {
  AoccParams params;  // lb=-8, ub=2

  // best error 0 from the first evaluation: perfect anytime score
  CHECK(aocc(trace_from_errors(std::vector<double>(10, 0.0)), Budget::evals(10), params) == 1.0);
  // best error at or above 1e2 throughout: zero
  CHECK(aocc(trace_from_errors(std::vector<double>(10, 100.0)), Budget::evals(10), params) == 0.0);
  CHECK(aocc(trace_from_errors(std::vector<double>(10, 1e7)), Budget::evals(10), params) == 0.0);
  // best error 1e-3 throughout: 1 - (-3+8)/10
  CHECK(aocc(trace_from_errors(std::vector<double>(10, 1e-3)), Budget::evals(10), params) == 0.5);
}

TEST_CASE("aocc handles short, empty and penalized traces") {
  AoccParams params;
  CHECK(aocc(EvalTrace{}, Budget::evals(5), params) == 0.0);

  // a short trace extends with its last best value
  const auto short_trace = trace_from_errors({1e-3});
  CHECK(aocc(short_trace, Budget::evals(10), params) == 0.5);

  CHECK_THROWS_AS(aocc(trace_from_errors({1.0, 1.0}), Budget::evals(1), params), InputError);
}

TEST_CASE("aocc bounds and monotonicity properties") {
  Rng rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const int len = 1 + static_cast<int>(rng.below(30));
    std::vector<double> errs(len), improved(len);
    for (int i = 0; i < len; ++i) {
      errs[i] = std::pow(10.0, rng.uniform(-10.0, 4.0));
      improved[i] = errs[i] * rng.uniform(0.1, 1.0);  // pointwise better
    }
    const Budget budget = Budget::evals(len + static_cast<int>(rng.below(10)));
    const double base = aocc(trace_from_errors(errs), budget);
    const double better = aocc(trace_from_errors(improved), budget);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    CHECK(better >= base - 1e-15);

    // truncating never scores above the full trace
    const int cut = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(len)));
    std::vector<double> head(errs.begin(), errs.begin() + cut);
    CHECK(aocc(trace_from_errors(head), budget) <= base + 1e-15);
  }
}

TEST_CASE("eaf matches the brute-force double loop on stub traces") {
  Rng rng(5);
  std::vector<EvalTrace> runs;
  for (int r = 0; r < 5; ++r) {
    std::vector<double> errs;
    double cur = std::pow(10.0, rng.uniform(0.0, 2.0));
    for (int i = 0; i < 40; ++i) {
      cur *= rng.uniform(0.6, 1.05);
      errs.push_back(cur);
    }
    runs.push_back(trace_from_errors(errs));
  }
  const auto budgets = std::vector<int>{1, 2, 5, 10, 20, 40};
  const auto targets = default_eaf_targets(1e-2, 1e2, 9);
  const auto grid = eaf(runs, budgets, targets);

  for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
      int hit = 0;
      for (const auto& run : runs) {
        double best = std::numeric_limits<double>::infinity();
        for (int t = 0; t < std::min<int>(budgets[bi], 40); ++t)
          best = std::min(best, run.records[t].f);
        if (best <= targets[ti]) ++hit;
      }
      CHECK(grid.values[bi][ti] == doctest::Approx(hit / 5.0));
    }
  }

  // monotone along both axes
  for (std::size_t bi = 0; bi + 1 < budgets.size(); ++bi)
    for (std::size_t ti = 0; ti < targets.size(); ++ti)
      CHECK(grid.values[bi][ti] <= grid.values[bi + 1][ti]);
  for (std::size_t bi = 0; bi < budgets.size(); ++bi)
    for (std::size_t ti = 0; ti + 1 < targets.size(); ++ti)
      CHECK(grid.values[bi][ti] <= grid.values[bi][ti + 1]);
}

TEST_CASE("eaf with a target above all errors attains 1 everywhere") {
  std::vector<EvalTrace> runs = {trace_from_errors({3.0, 2.0}), trace_from_errors({5.0, 4.0})};
  const auto grid = eaf(runs, {1, 2}, {1e6});
  for (const auto& row : grid.values) CHECK(row[0] == 1.0);
}

TEST_CASE("elo single updates match the frozen fixtures") {
  SUBCASE("equal ratings, win") {
    const auto [ra, rb] = elo_update(1000.0, 1000.0, 1.0, 32.0);
    CHECK(ra == 1016.0);
    CHECK(rb == 984.0);
  }
  SUBCASE("equal ratings, tie") {
    const auto [ra, rb] = elo_update(1000.0, 1000.0, 0.5, 32.0);
    CHECK(ra == 1000.0);
    CHECK(rb == 1000.0);
  }
  SUBCASE("asymmetric ratings, win") {
    const auto [ra, rb] = elo_update(1200.0, 1000.0, 1.0, 32.0);
    CHECK(ra == doctest::Approx(1207.6880983472654).epsilon(1e-12));
    CHECK(rb == doctest::Approx(992.3119016527346).epsilon(1e-12));
    CHECK(ra + rb == doctest::Approx(2200.0).epsilon(1e-12));
  }
}

TEST_CASE("elo tournament ranks a dominant fixture first and stays zero-sum") {
  OutcomeTable outcomes;
  outcomes.algorithms = {"alpha", "beta", "gamma"};
  Rng rng(10);
  outcomes.metric.resize(3);
  for (int cell = 0; cell < 20; ++cell) {
    const double base = rng.uniform(0.1, 0.5);
    outcomes.metric[0].push_back(base + 0.4);  // strictly better everywhere
    outcomes.metric[1].push_back(base + rng.uniform(0.0, 0.1));
    outcomes.metric[2].push_back(base);
  }
  EloParams params;
  params.n_matches = 1000;
  params.tournament_seed = 3;
  const auto table = elo_tournament(outcomes, params);
  const auto ranked = table.ranked();
  CHECK(ranked.front().algorithm == "alpha");
  CHECK(table.rating_sum() == doctest::Approx(3000.0).epsilon(1e-9));
  long matches = 0;
  for (const auto& e : table.entries) matches += e.matches;
  CHECK(matches == 2 * params.n_matches);
}

TEST_CASE("elo tournament with identical tables never moves ratings") {
  OutcomeTable outcomes;
  outcomes.algorithms = {"a", "b", "c"};
  outcomes.metric = {{0.5, 0.7}, {0.5, 0.7}, {0.5, 0.7}};
  EloParams params;
  params.n_matches = 500;
  const auto table = elo_tournament(outcomes, params);
  for (const auto& e : table.entries) {
    CHECK(e.rating == 1000.0);
    CHECK(e.wins == 0);
    CHECK(e.losses == 0);
  }
}

TEST_CASE("elo tournament is deterministic for a fixed seed") {
  OutcomeTable outcomes;
  outcomes.algorithms = {"a", "b", "c", "d"};
  Rng rng(77);
  outcomes.metric.resize(4);
  for (auto& row : outcomes.metric)
    for (int i = 0; i < 10; ++i) row.push_back(rng.uniform());
  EloParams params;
  params.n_matches = 2000;
  params.tournament_seed = 123;
  CHECK(rating_table_csv(elo_tournament(outcomes, params)) ==
        rating_table_csv(elo_tournament(outcomes, params)));
}

TEST_CASE("a reliable cell-win edge turns into a rating edge") {
  // A beats B in ~70% of cells; after 10^4 matches the ratings must order.
  OutcomeTable outcomes;
  outcomes.algorithms = {"A", "B"};
  Rng rng(13);
  outcomes.metric.resize(2);
  for (int cell = 0; cell < 100; ++cell) {
    const bool a_wins = rng.uniform() < 0.7;
    outcomes.metric[0].push_back(a_wins ? 0.9 : 0.1);
    outcomes.metric[1].push_back(0.5);
  }
  EloParams params;
  params.n_matches = 10000;
  params.tournament_seed = 29;
  const auto table = elo_tournament(outcomes, params);
  CHECK(table.entries[0].rating > table.entries[1].rating);
}

TEST_CASE("elo tournament rejects degenerate inputs") {
  OutcomeTable one;
  one.algorithms = {"only"};
  one.metric = {{0.5}};
  CHECK_THROWS_AS(elo_tournament(one), InputError);
}

TEST_CASE("welch t-test fixtures") {
  SUBCASE("identical samples give p = 1") {
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    CHECK(welch_t_test(xs, xs) == 1.0);
  }
  SUBCASE("fully separated near-constant samples give tiny p") {
    std::vector<double> a{0, 0, 0, 0, 0}, b{1, 1, 1, 1, 1};
    a[0] += 1e-9;
    b[0] += 1e-9;
    CHECK(welch_t_test(a, b) < 1e-6);
  }
  SUBCASE("zero variance, unequal means") {
    const std::vector<double> a{2, 2, 2}, b{3, 3, 3};
    CHECK(welch_t_test(a, b) == 0.0);
  }
  SUBCASE("fixed 10-point fixture matches the reference value") {
    const std::vector<double> a{2.31, 1.97, 2.45, 2.10, 2.28, 1.89, 2.52, 2.07, 2.19, 2.36};
    const std::vector<double> b{1.84, 2.02, 1.76, 1.93, 2.11, 1.68, 1.99, 1.87, 2.05, 1.71};
    const double p = welch_t_test(a, b);
    CHECK(std::abs(p - 0.0010897157103042174) < 1e-6);  // frozen external reference
    CHECK(std::abs(p - welch_p_by_quadrature(a, b)) < 1e-6);
  }
  SUBCASE("sample size below two is rejected") {
    const std::vector<double> one{1.0}, two{1.0, 2.0};
    CHECK_THROWS_AS(welch_t_test(one, two), InputError);
  }
}

TEST_CASE("welch t-test agrees with quadrature across random samples") {
  Rng rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> a, b;
    for (int i = 0; i < 8 + static_cast<int>(rng.below(5)); ++i) a.push_back(rng.normal(0.0, 1.0));
    for (int i = 0; i < 8 + static_cast<int>(rng.below(5)); ++i) b.push_back(rng.normal(0.3, 1.4));
    CHECK(std::abs(welch_t_test(a, b) - welch_p_by_quadrature(a, b)) < 1e-6);
  }
}

TEST_CASE("convergence aggregation fixtures") {
  SUBCASE("single run running max") {
    const auto curve = convergence_aggregate({{0.1, 0.5, 0.3}});
    REQUIRE(curve.size() == 3);
    CHECK(curve[0] == doctest::Approx(0.1));
    CHECK(curve[1] == doctest::Approx(0.5));
    CHECK(curve[2] == doctest::Approx(0.5));
  }
  SUBCASE("two runs average elementwise") {
    const auto curve = convergence_aggregate({{0.1, 0.5, 0.3}, {0.4, 0.2, 0.6}});
    CHECK(curve[0] == doctest::Approx(0.25));
    CHECK(curve[1] == doctest::Approx(0.45));
    CHECK(curve[2] == doctest::Approx(0.55));
  }
  SUBCASE("random lineages match a brute-force recomputation") {
    Rng rng(21);
    std::vector<std::vector<double>> runs(10, std::vector<double>(15));
    for (auto& run : runs)
      for (double& v : run) v = rng.uniform(-1.0, 1.0);
    const auto curve = convergence_aggregate(runs);
    for (std::size_t i = 0; i < 15; ++i) {
      double sum = 0.0;
      for (const auto& run : runs)
        sum += *std::max_element(run.begin(), run.begin() + static_cast<long>(i) + 1);
      CHECK(curve[i] == doctest::Approx(sum / 10.0).epsilon(1e-12));
    }
  }
  SUBCASE("ragged runs are rejected") {
    CHECK_THROWS_AS(convergence_aggregate({{0.1}, {0.1, 0.2}}), InputError);
  }
}
