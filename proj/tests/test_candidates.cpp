#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "blade/candidates.hpp"
#include "blade/evaluation.hpp"
#include "blade/metrics.hpp"
#include "blade/problems.hpp"
#include "blade/rng.hpp"

using namespace blade;

namespace {

Candidate builtin_candidate(SolverConfig config, int id = 1) {
  Candidate c;
  c.id = id;
  c.name = std::string(to_token(config.family));
  c.payload = std::move(config);
  return c;
}

}  // namespace

TEST_CASE("solver configs serialize canonically and round-trip") {
  SolverConfig config;
  config.family = SolverFamily::DifferentialEvolution;
  config.params = {{"NP", 30.0}, {"F", 0.5}, {"CR", 0.9}};
  CHECK(config.canonical() == "DifferentialEvolution(CR=0.9,F=0.5,NP=30)");

  const auto parsed = SolverConfig::parse(config.canonical());
  REQUIRE(parsed.has_value());
  CHECK(parsed->canonical() == config.canonical());

  CHECK(SolverConfig::parse("RandomSearch()").has_value());
  CHECK(SolverConfig::parse("def optimize(): pass").has_value() == false);
  CHECK(SolverConfig::parse("Unknown(x=1)").has_value() == false);
  CHECK(SolverConfig::parse("CmaEs(lambda=)").has_value() == false);
}

TEST_CASE("solver config validation enforces documented ranges") {
  SolverConfig bad;
  bad.family = SolverFamily::DifferentialEvolution;
  bad.params = {{"NP", 2.0}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.params = {{"NP", 10.5}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.params = {{"unknown_key", 1.0}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.params = {{"F", 0.0}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.params = {{"CR", 0.0}, {"F", 0.5}, {"NP", 12.0}};
  CHECK_NOTHROW(bad.validate());
}

TEST_CASE("builtin sessions are deterministic per seed") {
  const Bounds bounds = Bounds::symmetric(4);
  for (auto family : {SolverFamily::RandomSearch, SolverFamily::OnePlusOneES,
                      SolverFamily::DifferentialEvolution, SolverFamily::CmaEs}) {
    SolverConfig config;
    config.family = family;
    auto a = make_builtin_session(config, 4, bounds, 100, 42);
    auto b = make_builtin_session(config, 4, bounds, 100, 42);
    for (int i = 0; i < 6; ++i) {
      const auto pa = a->ask();
      const auto pb = b->ask();
      REQUIRE(pa.has_value());
      REQUIRE(pb.has_value());
      CHECK((*pa - *pb).cwiseAbs().maxCoeff() == 0.0);
      const double f = pa->squaredNorm();
      a->tell(f);
      b->tell(f);
    }
  }
}

TEST_CASE("random search always asks inside the bounds") {
  const Bounds bounds = Bounds::symmetric(3);
  SolverConfig config;
  auto session = make_builtin_session(config, 3, bounds, 1000, 7);
  for (int i = 0; i < 1000; ++i) {
    const auto p = session->ask();
    REQUIRE(p.has_value());
    CHECK(bounds.contains(*p));
    session->tell(0.0);
  }
}

TEST_CASE("differential evolution consumes exactly its budget") {
  // NP=10 on budget 100: initial population 10 + 90 trials.
  SolverConfig config;
  config.family = SolverFamily::DifferentialEvolution;
  config.params = {{"NP", 10.0}};
  const auto inst = generate_instance(1, 5, 3);
  const auto trace =
      run_candidate(builtin_candidate(config), inst, Budget::evals(100), 11);
  CHECK(trace.records.size() == 100);
  CHECK(trace.status == RunStatus::BudgetExhausted);
  // the population improved over the initial draws
  CHECK(trace.best_f() < trace.records[9].best_f);
}

TEST_CASE("one-plus-one es descends the linear slope steadily") {
  const auto inst = generate_instance(5, 5, 17);  // fid 5: monotone slope
  SolverConfig config;
  config.family = SolverFamily::OnePlusOneES;
  const auto trace =
      run_candidate(builtin_candidate(config), inst, Budget::evals(2000), 19);
  REQUIRE(trace.records.size() == 2000);

  int strict_improvements = 0;
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    CHECK(trace.records[i].best_f <= trace.records[i - 1].best_f);
    if (trace.records[i].best_f < trace.records[i - 1].best_f) ++strict_improvements;
  }
  CHECK(strict_improvements > 50);
  const double initial_err = trace.records.front().best_f - inst.f_opt;
  const double final_err = trace.best_f() - inst.f_opt;
  CHECK(final_err < 0.05 * initial_err);
}

TEST_CASE("cma-es solves the sphere to high precision") {
  const auto inst = generate_instance(1, 5, 23);
  SolverConfig config;
  config.family = SolverFamily::CmaEs;
  const auto trace =
      run_candidate(builtin_candidate(config), inst, Budget::rule_2000d(5), 29);
  CHECK(trace.records.size() == 10000);
  CHECK(trace.best_f() - inst.f_opt < 1e-6);
}

TEST_CASE("cma-es covariance stays symmetric positive definite on rosenbrock") {
  const auto inst = generate_instance(8, 5, 31);
  CmaEsSession session(5, inst.bounds, 37);
  const int lambda = session.lambda();
  int evals = 0;
  while (evals < 1000) {
    for (int k = 0; k < lambda; ++k) {
      const auto p = session.ask();
      REQUIRE(p.has_value());
      session.tell(evaluate(inst, *p));
      ++evals;
    }
    const Eigen::MatrixXd& c = session.covariance();
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
    CHECK(solver.eigenvalues().minCoeff() > 0.0);
  }
  CHECK(session.covariance_resets() == 0);
}

TEST_CASE("unknown launch recipes fail instantiation cleanly") {
  ExternalSpec spec;
  spec.launch.argv = {"/nonexistent/binary/for/blade"};
  CHECK_THROWS_AS(
      make_external_session(spec, 3, Bounds::symmetric(3), 10, 1, 5.0), SpawnError);
}
