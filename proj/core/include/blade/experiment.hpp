#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "blade/aad.hpp"
#include "blade/analysis.hpp"
#include "blade/config.hpp"
#include "blade/llm.hpp"
#include "blade/metrics.hpp"
#include "blade/problems.hpp"

namespace blade {

class StoreError : public BladeError {
 public:
  using BladeError::BladeError;
};

/// One entry of the experiment's method list: a search method or a
/// human-designed baseline solver.
struct MethodSpec {
  enum class Kind { Aad, Baseline };
  Kind kind = Kind::Aad;
  std::string name;
  AadConfig aad;
  SolverConfig baseline;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t master_seed = 0;
  int runs_per_cell = 10;
  int worker_count = 1;
  int budget_multiplier = 2000;  // evaluations = multiplier x dimension
  int budget_evaluations = 0;    // explicit override when > 0
  int training_seeds_per_instance = 1;
  int validation_runs = 10;
  double run_timeout_seconds = 60.0;
  bool log_points = false;
  std::filesystem::path output_dir = "results";

  std::vector<MethodSpec> methods;
  std::vector<SuiteSpec> suites;
  LlmSpec llm;
  RetryPolicy llm_retry;
  AoccParams aocc;
  EloParams elo;
  PromptSet prompts = PromptSet::defaults();
  std::optional<LaunchRecipe> external_launch;

  Budget budget_for(int dimension) const;
  void validate() const;
  const MethodSpec& method(const std::string& name) const;
};

/// Parses the documented experiment file format (see docs/formats.md and
/// configs/). Throws ConfigError with a line reference on malformed input.
ExperimentConfig parse_experiment_config(const std::string& toml_text);
ExperimentConfig parse_experiment_config_file(const std::filesystem::path& path);

/// Deterministic per-cell seed: independent of sibling methods and suites,
/// stable under appending new methods.
std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& method_name,
                        const std::string& suite_id, int run_index);

/// Fixed on-disk results layout:
///   manifest.json
///   runs/<method>/<suite>/run_<k>/{lineage.jsonl, llm_log.jsonl, evals/}
///   analysis/{aocc.csv, eaf.csv, elo.csv, convergence.csv, ceg_*.dot, report.txt}
///   summary.json
class ResultsStore {
 public:
  /// Initializes a fresh store; refuses to overwrite an existing manifest.
  static ResultsStore create(const std::filesystem::path& root, const ExperimentConfig& config,
                             const std::string& config_text);
  /// Opens an existing store (requires manifest.json).
  static ResultsStore open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path cell_dir(const std::string& method, const std::string& suite,
                                 int run_index) const;
  std::filesystem::path analysis_dir() const { return root_ / "analysis"; }
  const std::string& config_text() const { return config_text_; }

 private:
  ResultsStore() = default;
  std::filesystem::path root_;
  std::string config_text_;
};

struct CellResult {
  std::string method;
  std::string suite;
  int run_index = 0;
  std::string status;  // "ok" | "failed" | "aborted"
  std::string error;
};

struct ExperimentSummary {
  std::vector<CellResult> cells;
  bool all_ok() const;
  std::vector<CellResult> failures() const;
};

/// Executes every (method, suite, run) cell on a worker pool. Cell failures
/// stay isolated to their cell; the summary lists them. With an interrupt
/// flag set, in-flight cells finish and the rest are marked aborted.
ExperimentSummary run_experiment(const ExperimentConfig& config, ResultsStore& store,
                                 const std::atomic<bool>* interrupt = nullptr);

struct ValidationRow {
  std::string method;
  std::string suite;
  bool viable = false;
  std::string best_name;
  std::string best_payload;
  double best_training_fitness = 0.0;
};

/// Selects each method's best candidate (per-run select_best, then the best
/// run by training fitness), evaluates it on the suite's held-out instances
/// over validation_runs seeds, and emits aocc.csv, eaf.csv, elo.csv and the
/// report files into analysis/.
std::vector<ValidationRow> validate_results(const ExperimentConfig& config, ResultsStore& store);

/// Builds a code evolution graph per run into analysis/ (DOT plus a
/// node/edge CSV pair).
void analyze_ceg(const ExperimentConfig& config, ResultsStore& store,
                 const std::string& feature_name);

/// Rebuilds report.txt / report.csv from analysis/aocc.csv.
ReportTable analyze_report(const ResultsStore& store);

/// Reruns the rating tournament from analysis/aocc.csv (optionally with
/// overridden parameters) and rewrites elo.csv.
std::vector<RatingTable> rate_elo(const ExperimentConfig& config, ResultsStore& store,
                                  std::optional<long> n_matches = std::nullopt,
                                  std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace blade
