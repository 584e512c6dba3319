#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "blade/evaluation.hpp"

namespace blade {

/// Clipping window for log10 best-so-far error, mapped to [0, 1].
struct AoccParams {
  double lower_log = -8.0;
  double upper_log = 2.0;

  void validate() const {
    if (!(lower_log < upper_log)) throw ConfigError("aocc: lower_log must be < upper_log");
  }
};

/// Area over the convergence curve in [0, 1] (higher is better):
/// mean over t = 1..B of 1 - (clip(log10(besterr(t)), lb, ub) - lb)/(ub - lb),
/// where besterr holds its last value past the end of a short trace and
/// nonpositive errors clip to lb. Empty trace -> 0.
double aocc(const EvalTrace& trace, Budget budget, const AoccParams& params = {});

/// Attainment fractions over a budget x target grid. values[b][t] is the
/// fraction of runs whose best error at budgets[b] is <= targets[t].
struct EafGrid {
  std::vector<int> budgets;      // ascending
  std::vector<double> targets;   // ascending (loosest last)
  std::vector<std::vector<double>> values;  // [budget][target]
};

std::vector<double> default_eaf_targets(double lo = 1e-8, double hi = 1e2, int count = 51);
std::vector<int> default_eaf_budgets(int max_budget, int count = 20);

EafGrid eaf(const std::vector<EvalTrace>& runs, std::vector<int> budgets,
            std::vector<double> targets);

/// Scalar anytime curve: mean attainment over all targets per budget.
std::vector<double> eaf_curve(const EafGrid& grid);

/// One rating update. score_a in {0, 0.5, 1}; returns (r_a', r_b').
std::pair<double, double> elo_update(double rating_a, double rating_b, double score_a,
                                     double k_factor);

struct EloParams {
  double k_factor = 32.0;
  double initial_rating = 1000.0;
  long n_matches = 100000;
  std::uint64_t tournament_seed = 0;
};

struct RatingEntry {
  std::string algorithm;
  double rating = 0.0;
  long matches = 0;
  long wins = 0;
  long draws = 0;
  long losses = 0;
};

struct RatingTable {
  std::vector<RatingEntry> entries;  // input order preserved
  EloParams params;

  double rating_sum() const;
  /// Entries sorted by descending rating.
  std::vector<RatingEntry> ranked() const;
};

/// Per-algorithm final metric per shared cell (instance x run-seed); every
/// algorithm must cover the same cells in the same order.
struct OutcomeTable {
  std::vector<std::string> algorithms;
  std::vector<std::vector<double>> metric;  // [algorithm][cell]
};

/// Random one-against-one tournament: each match samples two distinct
/// algorithms and a shared cell uniformly; the higher metric wins (ties score
/// 0.5 each). Deterministic for a fixed tournament seed.
RatingTable elo_tournament(const OutcomeTable& outcomes, const EloParams& params = {});

/// Two-sided Welch t-test p-value (Welch-Satterthwaite degrees of freedom).
/// Zero variance in both samples: p = 1 for equal means, else 0.
double welch_t_test(std::span<const double> sample_a, std::span<const double> sample_b);

/// Mean best-so-far fitness per candidate index across runs of equal length.
/// Failed candidates are expected to carry their penalty fitness already.
std::vector<double> convergence_aggregate(const std::vector<std::vector<double>>& run_fitnesses);

// Plot-ready CSV renderings (column layouts documented in docs/formats.md).
std::string rating_table_csv(const RatingTable& table);
std::string eaf_csv(const std::string& algorithm, const EafGrid& grid);

}  // namespace blade
