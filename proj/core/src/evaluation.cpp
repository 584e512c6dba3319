#include "blade/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "blade/metrics.hpp"
#include "blade/rng.hpp"

namespace blade {
namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string sanitize_reason(std::string reason) {
  for (char& c : reason)
    if (c == '\n' || c == '\r') c = ' ';
  return reason;
}

}  // namespace

std::string_view to_token(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::CandidateFailed: return "candidate_failed";
    case RunStatus::BudgetExhausted: return "budget_exhausted";
  }
  return "completed";
}

RunStatus run_status_from_token(std::string_view token) {
  for (auto s : {RunStatus::Completed, RunStatus::CandidateFailed, RunStatus::BudgetExhausted})
    if (to_token(s) == token) return s;
  throw InputError("unknown run status: '" + std::string(token) + "'");
}

double EvalTrace::best_f() const {
  if (records.empty()) return std::numeric_limits<double>::infinity();
  return records.back().best_f;
}

double EvalTrace::best_error_at(int t) const {
  if (records.empty()) return std::numeric_limits<double>::infinity();
  const int i = std::min<int>(t, static_cast<int>(records.size())) - 1;
  return records[static_cast<std::size_t>(i)].best_f - f_opt;
}

FileEvalLogWriter::FileEvalLogWriter(const std::filesystem::path& path, const EvalTrace& header,
                                     bool log_points)
    : out_(path), log_points_(log_points) {
  if (!out_) throw InputError("cannot open evaluation log " + path.string());
  out_ << "# blade-eval v1\n";
  out_ << "# candidate=" << header.candidate_id << " instance=" << header.instance_id
       << " seed=" << header.seed << " budget=" << header.budget
       << " f_opt=" << fmt_double(header.f_opt) << " points=" << (log_points_ ? 1 : 0) << "\n";
}

void FileEvalLogWriter::append(const TraceRecord& rec) {
  out_ << rec.eval_index << ',' << fmt_double(rec.f) << ',' << fmt_double(rec.best_f);
  if (log_points_)
    for (double v : rec.x) out_ << ',' << fmt_double(v);
  out_ << '\n';
}

void FileEvalLogWriter::finish(RunStatus status, const std::string& reason) {
  if (finished_) return;
  finished_ = true;
  out_ << "# end status=" << to_token(status) << " reason=" << sanitize_reason(reason) << '\n';
  out_.flush();
}

EvalTrace read_eval_log(std::istream& in) {
  EvalTrace trace;
  std::string line;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line.rfind("# end ", 0) == 0) {
      const auto status_pos = line.find("status=");
      const auto reason_pos = line.find(" reason=");
      if (status_pos == std::string::npos || reason_pos == std::string::npos)
        throw InputError("malformed end line in evaluation log");
      trace.status = run_status_from_token(
          line.substr(status_pos + 7, reason_pos - status_pos - 7));
      trace.failure_reason = line.substr(reason_pos + 8);
      saw_end = true;
      continue;
    }
    if (line.rfind("# candidate=", 0) == 0) {
      std::istringstream hs(line.substr(2));
      std::string field;
      while (hs >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        if (key == "candidate") trace.candidate_id = value;
        else if (key == "instance") trace.instance_id = value;
        else if (key == "seed") trace.seed = std::stoull(value);
        else if (key == "budget") trace.budget = std::stoi(value);
        else if (key == "f_opt") trace.f_opt = parse_double(value);
      }
      continue;
    }
    if (line.empty() || line[0] == '#') continue;

    const auto parts = split(line, ',');
    if (parts.size() < 3) throw InputError("malformed record in evaluation log: " + line);
    TraceRecord rec;
    rec.eval_index = std::stoi(parts[0]);
    rec.f = parse_double(parts[1]);
    rec.best_f = parse_double(parts[2]);
    for (std::size_t i = 3; i < parts.size(); ++i) rec.x.push_back(parse_double(parts[i]));
    trace.records.push_back(std::move(rec));
  }
  if (!saw_end) {
    // Interrupted run: the partial trace stands, marked as a failure.
    trace.status = RunStatus::CandidateFailed;
    trace.failure_reason = "log truncated";
  }
  return trace;
}

EvalTrace read_eval_log_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open evaluation log " + path.string());
  return read_eval_log(in);
}

DirectoryEvalLogSink::DirectoryEvalLogSink(std::filesystem::path dir, bool log_points)
    : dir_(std::move(dir)), log_points_(log_points) {
  std::filesystem::create_directories(dir_);
}

std::unique_ptr<EvalLogWriter> DirectoryEvalLogSink::open(const EvalTrace& header) {
  const std::string name =
      header.candidate_id + "__" + header.instance_id + "__s" + std::to_string(header.seed) +
      ".csv";
  return std::make_unique<FileEvalLogWriter>(dir_ / name, header, log_points_);
}

EvalTrace run_session(const FunctionRegistry& registry, SolverSession& session,
                      const ProblemInstance& instance, Budget budget, EvalTrace header,
                      const RunOptions& options, EvalLogWriter* log) {
  if (budget.max_evaluations <= 0) throw InputError("budget must be positive");
  EvalTrace trace = std::move(header);
  trace.budget = budget.max_evaluations;
  trace.instance_id = instance.id.empty() ? trace.instance_id : instance.id;
  trace.f_opt = instance.f_opt;

  const double deadline = now_seconds() + options.timeout_seconds;
  double best = std::numeric_limits<double>::infinity();
  RunStatus status = RunStatus::BudgetExhausted;
  std::string reason;

  try {
    while (static_cast<int>(trace.records.size()) < budget.max_evaluations) {
      if (now_seconds() > deadline)
        throw TimeoutError("run exceeded its wall-clock allowance");
      auto point = session.ask();
      if (!point) {
        status = RunStatus::Completed;
        break;
      }
      if (static_cast<int>(point->size()) != instance.dimension)
        throw ProtocolError("dimension mismatch: session asked a " +
                            std::to_string(point->size()) + "-vector on a " +
                            std::to_string(instance.dimension) + "-d instance");

      double f;
      if (point->allFinite()) {
        f = evaluate(registry, instance, *point);
        if (std::isnan(f)) f = kNonFiniteAskValue;
      } else {
        f = kNonFiniteAskValue;  // NaN/Inf asks count as worst-case queries
      }
      best = std::min(best, f);

      TraceRecord rec;
      rec.eval_index = static_cast<int>(trace.records.size()) + 1;
      rec.f = f;
      rec.best_f = best;
      if (options.log_points)
        rec.x.assign(point->data(), point->data() + point->size());
      trace.records.push_back(rec);
      if (log) log->append(trace.records.back());  // logged before the tell

      session.tell(f);
    }
  } catch (const std::exception& e) {
    status = RunStatus::CandidateFailed;
    reason = e.what();
  }

  try {
    session.finish();
  } catch (const std::exception&) {
    // the run outcome is already decided
  }

  trace.status = status;
  trace.failure_reason = sanitize_reason(reason);
  if (log) log->finish(status, trace.failure_reason);
  return trace;
}

EvalTrace run_candidate(const FunctionRegistry& registry, const Candidate& candidate,
                        const ProblemInstance& instance, Budget budget, std::uint64_t seed,
                        const RunOptions& options, EvalLogSink* log_sink) {
  EvalTrace header;
  header.candidate_id = "c" + std::to_string(candidate.id);
  header.instance_id = instance.id;
  header.seed = seed;
  header.budget = budget.max_evaluations;
  header.f_opt = instance.f_opt;

  std::unique_ptr<EvalLogWriter> log;
  if (log_sink) log = log_sink->open(header);

  std::unique_ptr<SolverSession> session;
  try {
    session = instantiate(candidate, instance.dimension, instance.bounds, budget.max_evaluations,
                          seed, options.timeout_seconds);
  } catch (const std::exception& e) {
    header.status = RunStatus::CandidateFailed;
    header.failure_reason = sanitize_reason(std::string("instantiation: ") + e.what());
    if (log) log->finish(header.status, header.failure_reason);
    return header;
  }

  return run_session(registry, *session, instance, budget, std::move(header), options, log.get());
}

EvalTrace run_candidate(const Candidate& candidate, const ProblemInstance& instance, Budget budget,
                        std::uint64_t seed, const RunOptions& options, EvalLogSink* log_sink) {
  return run_candidate(FunctionRegistry::shared(), candidate, instance, budget, seed, options,
                       log_sink);
}

double training_fitness(const FunctionRegistry& registry, const Candidate& candidate,
                        const std::vector<ProblemInstance>& instances,
                        const std::vector<std::uint64_t>& seeds, Budget budget,
                        const AoccParams& aocc_params, const RunOptions& options,
                        EvalLogSink* sink) {
  if (instances.empty() || seeds.empty())
    throw InputError("training_fitness: need at least one instance and one seed");

  double sum = 0.0;
  int n = 0;
  for (const auto& instance : instances) {
    for (const std::uint64_t seed : seeds) {
      // Pair seed depends only on (seed, instance), so every candidate sees
      // the same run conditions.
      const std::uint64_t run_seed = seed_mix({seed, hash_text(instance.id)});
      const EvalTrace trace =
          run_candidate(registry, candidate, instance, budget, run_seed, options, sink);
      sum += trace.status == RunStatus::CandidateFailed ? kFailurePenaltyFitness
                                                        : aocc(trace, budget, aocc_params);
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

double training_fitness(const Candidate& candidate, const std::vector<ProblemInstance>& instances,
                        const std::vector<std::uint64_t>& seeds, Budget budget,
                        const AoccParams& aocc_params, const RunOptions& options,
                        EvalLogSink* sink) {
  return training_fitness(FunctionRegistry::shared(), candidate, instances, seeds, budget,
                          aocc_params, options, sink);
}

}  // namespace blade
