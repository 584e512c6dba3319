#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "blade/evaluation.hpp"
#include "blade/metrics.hpp"
#include "blade/problems.hpp"
#include "blade/rng.hpp"

using namespace blade;
namespace fs = std::filesystem;

namespace {

Candidate random_search_candidate(int id = 1) {
  Candidate c;
  c.id = id;
  c.name = "random-search";
  c.payload = SolverConfig{};
  return c;
}

// Scripted session for driving run_session directly in tests.
class ScriptedSession : public SolverSession {
 public:
  enum class Mode { FixedPoint, CountedAsks, NonFinite, Sleepy, ThrowOnTell };

  ScriptedSession(Mode mode, Eigen::VectorXd point, int ask_limit = -1)
      : mode_(mode), point_(std::move(point)), ask_limit_(ask_limit) {}

  std::optional<Eigen::VectorXd> ask() override {
    if (ask_limit_ >= 0 && asks_ >= ask_limit_) return std::nullopt;
    ++asks_;
    switch (mode_) {
      case Mode::NonFinite: {
        Eigen::VectorXd p = point_;
        p(0) = std::numeric_limits<double>::quiet_NaN();
        return p;
      }
      case Mode::Sleepy:
        std::this_thread::sleep_for(std::chrono::milliseconds(40));
        return point_;
      default:
        return point_;
    }
  }

  void tell(double f) override {
    ++tells_;
    if (mode_ == Mode::ThrowOnTell && tells_ >= 3) throw std::runtime_error("simulated crash");
    (void)f;
  }

  int asks() const { return asks_; }
  int tells() const { return tells_; }

 private:
  Mode mode_;
  Eigen::VectorXd point_;
  int ask_limit_;
  int asks_ = 0;
  int tells_ = 0;
};

EvalTrace header_for(const ProblemInstance& inst) {
  EvalTrace h;
  h.candidate_id = "c1";
  h.instance_id = inst.id;
  h.seed = 1;
  h.f_opt = inst.f_opt;
  return h;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("blade_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("budget is a hard cap for never-terminating candidates") {
  const auto inst = generate_instance(1, 5, 41);
  const auto trace = run_candidate(random_search_candidate(), inst, Budget::evals(100), 5);
  CHECK(trace.records.size() == 100);
  CHECK(trace.status == RunStatus::BudgetExhausted);
  for (std::size_t i = 0; i < trace.records.size(); ++i)
    CHECK(trace.records[i].eval_index == static_cast<int>(i) + 1);
}

TEST_CASE("over-asking sessions get exactly budget tells, then the stop signal") {
  const auto inst = generate_instance(2, 3, 43);
  ScriptedSession session(ScriptedSession::Mode::FixedPoint, Eigen::VectorXd::Zero(3), 150);
  const auto trace = run_session(FunctionRegistry::shared(), session, inst, Budget::evals(100),
                                 header_for(inst));
  CHECK(trace.records.size() == 100);
  CHECK(session.tells() == 100);
  CHECK(session.asks() == 100);  // the 101st ask is never issued
  CHECK(trace.status == RunStatus::BudgetExhausted);
}

TEST_CASE("a candidate that stops early completes with a short trace") {
  const auto inst = generate_instance(2, 3, 47);
  ScriptedSession session(ScriptedSession::Mode::FixedPoint, Eigen::VectorXd::Zero(3), 1);
  const auto trace = run_session(FunctionRegistry::shared(), session, inst, Budget::evals(100),
                                 header_for(inst));
  CHECK(trace.status == RunStatus::Completed);
  CHECK(trace.records.size() == 1);
}

TEST_CASE("querying the optimum immediately yields a perfect fitness") {
  const auto inst = generate_instance(15, 4, 53);
  ScriptedSession session(ScriptedSession::Mode::FixedPoint, inst.x_opt);
  const auto trace = run_session(FunctionRegistry::shared(), session, inst, Budget::evals(50),
                                 header_for(inst));
  CHECK(aocc(trace, Budget::evals(50)) == 1.0);
}

TEST_CASE("non-finite asks are recorded as worst-case values, not crashes") {
  const auto inst = generate_instance(1, 3, 59);
  ScriptedSession session(ScriptedSession::Mode::NonFinite, Eigen::VectorXd::Zero(3), 5);
  const auto trace = run_session(FunctionRegistry::shared(), session, inst, Budget::evals(10),
                                 header_for(inst));
  CHECK(trace.status == RunStatus::Completed);
  REQUIRE(trace.records.size() == 5);
  for (const auto& rec : trace.records) CHECK(rec.f == kNonFiniteAskValue);
}

TEST_CASE("a crash mid-run preserves the partial trace") {
  const auto inst = generate_instance(1, 3, 61);
  ScriptedSession session(ScriptedSession::Mode::ThrowOnTell, Eigen::VectorXd::Zero(3));
  const auto trace = run_session(FunctionRegistry::shared(), session, inst, Budget::evals(10),
                                 header_for(inst));
  CHECK(trace.status == RunStatus::CandidateFailed);
  CHECK(trace.records.size() == 3);
  CHECK(trace.failure_reason.find("simulated crash") != std::string::npos);
}

TEST_CASE("wall-clock timeouts fail the run") {
  const auto inst = generate_instance(1, 3, 67);
  ScriptedSession session(ScriptedSession::Mode::Sleepy, Eigen::VectorXd::Zero(3));
  RunOptions options;
  options.timeout_seconds = 0.1;
  const auto trace = run_session(FunctionRegistry::shared(), session, inst, Budget::evals(1000),
                                 header_for(inst), options);
  CHECK(trace.status == RunStatus::CandidateFailed);
  CHECK(trace.records.size() < 1000);
  CHECK(trace.failure_reason.find("wall-clock") != std::string::npos);
}

TEST_CASE("best-so-far is monotone non-increasing across random runs") {
  Rng seeds(3);
  for (int rep = 0; rep < 5; ++rep) {
    const auto inst = generate_instance(15, 3, seeds.u64());
    const auto trace =
        run_candidate(random_search_candidate(), inst, Budget::evals(200), seeds.u64());
    for (std::size_t i = 1; i < trace.records.size(); ++i) {
      CHECK(trace.records[i].best_f <= trace.records[i - 1].best_f);
      CHECK(trace.records[i].best_f <= trace.records[i].f);
    }
  }
}

TEST_CASE("evaluation logs replay to the exact in-memory trace") {
  TempDir tmp;
  DirectoryEvalLogSink sink(tmp.path);
  const auto inst = generate_instance(8, 4, 71);
  const auto trace =
      run_candidate(random_search_candidate(7), inst, Budget::evals(64), 73, {}, &sink);

  const auto log_path = tmp.path / ("c7__" + inst.id + "__s73.csv");
  REQUIRE(fs::exists(log_path));
  const auto replayed = read_eval_log_file(log_path);

  CHECK(replayed.candidate_id == "c7");
  CHECK(replayed.instance_id == inst.id);
  CHECK(replayed.seed == 73);
  CHECK(replayed.status == trace.status);
  REQUIRE(replayed.records.size() == trace.records.size());
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    CHECK(replayed.records[i].f == trace.records[i].f);        // bit-exact round-trip
    CHECK(replayed.records[i].best_f == trace.records[i].best_f);
  }
  CHECK(aocc(replayed, Budget::evals(64)) == aocc(trace, Budget::evals(64)));
}

TEST_CASE("instantiation failure produces an empty failed trace") {
  Candidate broken;
  broken.id = 9;
  broken.name = "broken";
  ExternalSpec spec;
  spec.launch.argv = {"/nonexistent/blade/stub"};
  broken.payload = spec;

  TempDir tmp;
  DirectoryEvalLogSink sink(tmp.path);
  const auto inst = generate_instance(1, 3, 79);
  const auto trace = run_candidate(broken, inst, Budget::evals(10), 83, {}, &sink);
  CHECK(trace.status == RunStatus::CandidateFailed);
  CHECK(trace.records.empty());
  CHECK(trace.failure_reason.find("instantiation") != std::string::npos);
}

TEST_CASE("training fitness averages per-pair aocc with failure penalties") {
  const std::vector<ProblemInstance> instances = {generate_instance(1, 3, 89),
                                                  generate_instance(2, 3, 97)};
  const std::vector<std::uint64_t> seeds = {11, 12};
  const Budget budget = Budget::evals(60);
  const AoccParams params;

  SUBCASE("matches an independent recomputation over the documented pair seeds") {
    const auto cand = random_search_candidate();
    const double fitness = training_fitness(cand, instances, seeds, budget, params);
    double sum = 0.0;
    for (const auto& inst : instances) {
      for (const auto seed : seeds) {
        const auto trace =
            run_candidate(cand, inst, budget, seed_mix({seed, hash_text(inst.id)}));
        sum += aocc(trace, budget, params);
      }
    }
    CHECK(fitness == doctest::Approx(sum / 4.0).epsilon(1e-15));
    CHECK(fitness > 0.0);
    CHECK(fitness <= 1.0);
  }

  SUBCASE("a candidate that cannot start scores the failure penalty") {
    Candidate broken;
    broken.id = 2;
    ExternalSpec spec;
    spec.launch.argv = {"/nonexistent/blade/stub"};
    broken.payload = spec;
    CHECK(training_fitness(broken, instances, seeds, budget, params) == -1.0);
  }

  SUBCASE("empty inputs are rejected") {
    CHECK_THROWS_AS(training_fitness(random_search_candidate(), {}, seeds, budget, params),
                    InputError);
  }
}
