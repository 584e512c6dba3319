#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "blade/candidates.hpp"
#include "blade/problems.hpp"

namespace blade {

struct AoccParams;  // metrics.hpp

/// Fitness contribution of a failed run (any negative value loses against
/// every AOCC in [0, 1]; -1 is unambiguous).
inline constexpr double kFailurePenaltyFitness = -1.0;

/// Worst-case value recorded for non-finite asked points.
inline constexpr double kNonFiniteAskValue = 1e12;

struct Budget {
  int max_evaluations = 0;

  static Budget evals(int n) { return Budget{n}; }
  /// The default evaluation budget rule: 2000 x dimensionality.
  static Budget rule_2000d(int dimension) { return Budget{2000 * dimension}; }
};

enum class RunStatus { Completed, CandidateFailed, BudgetExhausted };

std::string_view to_token(RunStatus s);
RunStatus run_status_from_token(std::string_view token);

struct TraceRecord {
  int eval_index = 0;  // 1-based, gapless
  double f = 0.0;
  double best_f = 0.0;
  std::vector<double> x;  // populated only when point logging is on
};

/// Per-run evaluation record: ordered (index, f, best-so-far) under a hard
/// budget, plus how the run ended.
struct EvalTrace {
  std::string candidate_id;
  std::string instance_id;
  std::uint64_t seed = 0;
  int budget = 0;
  double f_opt = 0.0;
  RunStatus status = RunStatus::Completed;
  std::string failure_reason;
  std::vector<TraceRecord> records;

  double best_f() const;
  /// best_f(min(t, |records|)) - f_opt for t >= 1; +inf for an empty trace.
  double best_error_at(int t) const;
};

struct RunOptions {
  double timeout_seconds = 60.0;
  bool log_points = false;  // include x in trace records and log lines
};

/// Append-only run log: a header, one line per evaluation, a status footer.
class EvalLogWriter {
 public:
  virtual ~EvalLogWriter() = default;
  virtual void append(const TraceRecord& rec) = 0;
  virtual void finish(RunStatus status, const std::string& reason) = 0;
};

class FileEvalLogWriter final : public EvalLogWriter {
 public:
  FileEvalLogWriter(const std::filesystem::path& path, const EvalTrace& header, bool log_points);
  void append(const TraceRecord& rec) override;
  void finish(RunStatus status, const std::string& reason) override;

 private:
  std::ofstream out_;
  bool log_points_ = false;
  bool finished_ = false;
};

/// Replays a run log into a trace; AOCC over the replay equals the in-memory
/// value exactly (floats round-trip).
EvalTrace read_eval_log(std::istream& in);
EvalTrace read_eval_log_file(const std::filesystem::path& path);

/// Hands out one log writer per run; a null sink disables logging.
class EvalLogSink {
 public:
  virtual ~EvalLogSink() = default;
  virtual std::unique_ptr<EvalLogWriter> open(const EvalTrace& header) = 0;
};

class DirectoryEvalLogSink final : public EvalLogSink {
 public:
  explicit DirectoryEvalLogSink(std::filesystem::path dir, bool log_points = false);
  std::unique_ptr<EvalLogWriter> open(const EvalTrace& header) override;

 private:
  std::filesystem::path dir_;
  bool log_points_ = false;
};

/// Drives an already-instantiated session. `header` carries the run
/// identifiers; records, status and failure reason are filled in here.
EvalTrace run_session(const FunctionRegistry& registry, SolverSession& session,
                      const ProblemInstance& instance, Budget budget, EvalTrace header,
                      const RunOptions& options = {}, EvalLogWriter* log = nullptr);

/// Drives the candidate's ask-tell session against the instance until the
/// budget is exhausted or the candidate terminates. The budget is a hard cap
/// enforced here, never by the candidate; a crash mid-run preserves the
/// partial trace with status CandidateFailed, and an instantiation failure
/// yields a CandidateFailed trace with zero records.
EvalTrace run_candidate(const FunctionRegistry& registry, const Candidate& candidate,
                        const ProblemInstance& instance, Budget budget, std::uint64_t seed,
                        const RunOptions& options = {}, EvalLogSink* log_sink = nullptr);
EvalTrace run_candidate(const Candidate& candidate, const ProblemInstance& instance, Budget budget,
                        std::uint64_t seed, const RunOptions& options = {},
                        EvalLogSink* log_sink = nullptr);

/// Mean AOCC over all (instance, seed) pairs; failed runs contribute
/// kFailurePenaltyFitness instead of their AOCC.
double training_fitness(const FunctionRegistry& registry, const Candidate& candidate,
                        const std::vector<ProblemInstance>& instances,
                        const std::vector<std::uint64_t>& seeds, Budget budget,
                        const AoccParams& aocc_params, const RunOptions& options = {},
                        EvalLogSink* sink = nullptr);
double training_fitness(const Candidate& candidate, const std::vector<ProblemInstance>& instances,
                        const std::vector<std::uint64_t>& seeds, Budget budget,
                        const AoccParams& aocc_params, const RunOptions& options = {},
                        EvalLogSink* sink = nullptr);

}  // namespace blade
