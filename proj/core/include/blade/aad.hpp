#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "blade/candidates.hpp"
#include "blade/evaluation.hpp"
#include "blade/llm.hpp"
#include "blade/metrics.hpp"
#include "blade/problems.hpp"

namespace blade {

class NoViableCandidateError : public BladeError {
 public:
  using BladeError::BladeError;
};

enum class AadMethod { LlameaES, RandomSampling };
enum class PromptSelection { Single, UniformRandom };

std::string_view to_token(AadMethod m);
AadMethod aad_method_from_token(std::string_view token);
std::string_view to_token(PromptSelection s);
PromptSelection prompt_selection_from_token(std::string_view token);

struct AadConfig {
  AadMethod method = AadMethod::LlameaES;
  std::string name;  // method label in stores and reports
  int mu = 4;
  int lambda = 12;
  bool elitist = false;  // plus selection keeps parents in the survivor pool
  int candidate_budget = 100;
  std::vector<int> mutation_prompt_ids = {1};
  PromptSelection prompt_selection = PromptSelection::Single;
  bool include_descriptions = true;

  void validate(const PromptSet& prompts) const;
};

/// Every generated candidate of one AAD run, in generation order. Failed
/// candidates stay in the lineage with their penalty fitness.
struct RunLineage {
  std::string method_name;
  std::uint64_t run_seed = 0;
  std::vector<Candidate> candidates;  // ids 1..candidate_budget

  /// Fitness per candidate in id order (penalty for failed entries).
  std::vector<double> fitness_sequence() const;
};

/// Wiring shared by the search methods for one run.
struct AadContext {
  LlmClient* llm = nullptr;
  const PromptSet* prompts = nullptr;
  std::vector<ProblemInstance> train_instances;
  std::vector<std::uint64_t> train_seeds = {1};
  Budget eval_budget;
  AoccParams aocc_params;
  RunOptions run_options;
  EvalLogSink* eval_logs = nullptr;
  QueryLogger* llm_log = nullptr;
  std::string model = "mock";
  double temperature = 0.7;
  RetryPolicy retry;
  /// Launch recipe for source-code payloads; without it, non-config payloads
  /// fail the candidate.
  std::optional<LaunchRecipe> external_launch;
  const FunctionRegistry* registry = nullptr;  // nullptr = shared registry
};

/// LLaMEA-style (mu,lambda) / (mu+lambda) evolution over candidates: mu task
/// prompt initializations, then offspring batches of lambda, each offspring
/// mutating a uniformly drawn member of the current parent set with a
/// mutation prompt chosen per prompt_selection. Stops after exactly
/// candidate_budget candidates (the last batch truncates); the generation
/// index of candidate id is ceil((id - mu) / lambda).
RunLineage run_llamea(const AadConfig& config, AadContext& ctx, std::uint64_t run_seed);

/// Baseline: candidate_budget independent task-prompt generations, no
/// parent-offspring edges.
RunLineage run_random_sampling(const AadConfig& config, AadContext& ctx, std::uint64_t run_seed);

RunLineage run_aad(const AadConfig& config, AadContext& ctx, std::uint64_t run_seed);

/// Candidate with maximal training fitness; ties resolve to the earliest id.
/// Throws NoViableCandidateError when every candidate failed.
const Candidate& select_best(const RunLineage& lineage);

// Lineage persistence: one candidate record per line (id, parents,
// generation, prompt id, name, description, payload, fitness, status); the
// input contract for code evolution graphs.
std::string candidate_to_json(const Candidate& candidate);
Candidate candidate_from_json(const std::string& line);
void write_lineage(std::ostream& out, const RunLineage& lineage);
void write_lineage_file(const std::filesystem::path& path, const RunLineage& lineage);
RunLineage read_lineage(std::istream& in);
RunLineage read_lineage_file(const std::filesystem::path& path);

}  // namespace blade
