#include "blade/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "blade/rng.hpp"

namespace blade {
namespace {

// Regularized incomplete beta I_x(a, b) via the continued fraction
// (modified Lentz), split at the symmetry point for convergence.
double ibeta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;

  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * ibeta_cf(a, b, x) / a;
  return 1.0 - front * ibeta_cf(b, a, 1.0 - x) / b;
}

// Two-sided survival of Student's t: P(|T_df| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2).
double student_t_two_sided(double t, double df) {
  const double x = df / (df + t * t);
  return ibeta(df / 2.0, 0.5, x);
}

double sample_mean(std::span<const double> xs) {
  double s = 0.0;
  for (double v : xs) s += v;
  return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs, double mean) {
  double s = 0.0;
  for (double v : xs) s += (v - mean) * (v - mean);
  return s / static_cast<double>(xs.size() - 1);
}

}  // namespace

double aocc(const EvalTrace& trace, Budget budget, const AoccParams& params) {
  params.validate();
  if (budget.max_evaluations <= 0) throw InputError("aocc: budget must be positive");
  if (static_cast<int>(trace.records.size()) > budget.max_evaluations)
    throw InputError("aocc: trace longer than budget");
  if (trace.records.empty()) return 0.0;

  const double lb = params.lower_log, ub = params.upper_log;
  const double span = ub - lb;
  double acc = 0.0;
  for (int t = 1; t <= budget.max_evaluations; ++t) {
    const double err = trace.best_error_at(t);
    double log_err;
    if (!(err > 0.0)) {
      log_err = lb;  // at or below the optimum: perfect
    } else {
      log_err = std::clamp(std::log10(err), lb, ub);
    }
    acc += 1.0 - (log_err - lb) / span;
  }
  return acc / static_cast<double>(budget.max_evaluations);
}

std::vector<double> default_eaf_targets(double lo, double hi, int count) {
  std::vector<double> out;
  out.reserve(count);
  const double llo = std::log10(lo), lhi = std::log10(hi);
  for (int i = 0; i < count; ++i)
    out.push_back(std::pow(10.0, llo + (lhi - llo) * i / static_cast<double>(count - 1)));
  return out;
}

std::vector<int> default_eaf_budgets(int max_budget, int count) {
  std::vector<int> out;
  double prev = 0.0;
  for (int i = 0; i < count; ++i) {
    const double frac = static_cast<double>(i + 1) / count;
    int b = static_cast<int>(std::round(std::pow(static_cast<double>(max_budget), frac)));
    b = std::max<int>(b, static_cast<int>(prev) + 1);
    b = std::min(b, max_budget);
    out.push_back(b);
    prev = b;
    if (b == max_budget) break;
  }
  return out;
}

EafGrid eaf(const std::vector<EvalTrace>& runs, std::vector<int> budgets,
            std::vector<double> targets) {
  if (runs.empty()) throw InputError("eaf: no runs");
  EafGrid grid;
  grid.budgets = std::move(budgets);
  grid.targets = std::move(targets);
  grid.values.assign(grid.budgets.size(), std::vector<double>(grid.targets.size(), 0.0));

  for (std::size_t bi = 0; bi < grid.budgets.size(); ++bi) {
    for (std::size_t ti = 0; ti < grid.targets.size(); ++ti) {
      int attained = 0;
      for (const auto& run : runs)
        if (run.best_error_at(grid.budgets[bi]) <= grid.targets[ti]) ++attained;
      grid.values[bi][ti] = static_cast<double>(attained) / static_cast<double>(runs.size());
    }
  }
  return grid;
}

std::vector<double> eaf_curve(const EafGrid& grid) {
  std::vector<double> curve(grid.budgets.size(), 0.0);
  for (std::size_t bi = 0; bi < grid.budgets.size(); ++bi) {
    double s = 0.0;
    for (double v : grid.values[bi]) s += v;
    curve[bi] = grid.targets.empty() ? 0.0 : s / static_cast<double>(grid.targets.size());
  }
  return curve;
}

std::pair<double, double> elo_update(double rating_a, double rating_b, double score_a,
                                     double k_factor) {
  const double expected_a = 1.0 / (1.0 + std::pow(10.0, (rating_b - rating_a) / 400.0));
  const double delta = k_factor * (score_a - expected_a);
  return {rating_a + delta, rating_b - delta};
}

double RatingTable::rating_sum() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.rating;
  return s;
}

std::vector<RatingEntry> RatingTable::ranked() const {
  std::vector<RatingEntry> out = entries;
  std::stable_sort(out.begin(), out.end(),
                   [](const RatingEntry& a, const RatingEntry& b) { return a.rating > b.rating; });
  return out;
}

RatingTable elo_tournament(const OutcomeTable& outcomes, const EloParams& params) {
  const std::size_t n = outcomes.algorithms.size();
  if (n < 2) throw InputError("elo_tournament: need at least two algorithms");
  if (outcomes.metric.size() != n)
    throw InputError("elo_tournament: metric rows do not match algorithms");
  const std::size_t cells = outcomes.metric.front().size();
  if (cells == 0) throw InputError("elo_tournament: no cells");
  for (const auto& row : outcomes.metric)
    if (row.size() != cells) throw InputError("elo_tournament: ragged metric table");

  RatingTable table;
  table.params = params;
  table.entries.reserve(n);
  for (const auto& name : outcomes.algorithms)
    table.entries.push_back({name, params.initial_rating, 0, 0, 0, 0});

  // Match sampling order (documented): first player, opponent offset, cell.
  Rng rng(params.tournament_seed);
  for (long m = 0; m < params.n_matches; ++m) {
    const std::size_t a = rng.below(n);
    std::size_t b = rng.below(n - 1);
    if (b >= a) ++b;
    const std::size_t cell = rng.below(cells);

    const double ma = outcomes.metric[a][cell];
    const double mb = outcomes.metric[b][cell];
    const double score_a = ma > mb ? 1.0 : (ma < mb ? 0.0 : 0.5);

    auto& ea = table.entries[a];
    auto& eb = table.entries[b];
    std::tie(ea.rating, eb.rating) = elo_update(ea.rating, eb.rating, score_a, params.k_factor);
    ++ea.matches;
    ++eb.matches;
    if (score_a == 1.0) {
      ++ea.wins;
      ++eb.losses;
    } else if (score_a == 0.0) {
      ++ea.losses;
      ++eb.wins;
    } else {
      ++ea.draws;
      ++eb.draws;
    }
  }
  return table;
}

double welch_t_test(std::span<const double> sample_a, std::span<const double> sample_b) {
  if (sample_a.size() < 2 || sample_b.size() < 2)
    throw InputError("welch_t_test: need at least two observations per sample");

  const double na = static_cast<double>(sample_a.size());
  const double nb = static_cast<double>(sample_b.size());
  const double ma = sample_mean(sample_a);
  const double mb = sample_mean(sample_b);
  const double va = sample_variance(sample_a, ma);
  const double vb = sample_variance(sample_b, mb);

  if (va == 0.0 && vb == 0.0) return ma == mb ? 1.0 : 0.0;

  const double se2 = va / na + vb / nb;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df =
      se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  return student_t_two_sided(t, df);
}

std::vector<double> convergence_aggregate(const std::vector<std::vector<double>>& run_fitnesses) {
  if (run_fitnesses.empty()) return {};
  const std::size_t len = run_fitnesses.front().size();
  for (const auto& run : run_fitnesses)
    if (run.size() != len) throw InputError("convergence_aggregate: runs differ in length");

  std::vector<double> curve(len, 0.0);
  for (const auto& run : run_fitnesses) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) {
      best = std::max(best, run[i]);
      curve[i] += best;
    }
  }
  for (double& v : curve) v /= static_cast<double>(run_fitnesses.size());
  return curve;
}

std::string rating_table_csv(const RatingTable& table) {
  std::ostringstream os;
  os << "algorithm,rating,matches,wins,draws,losses\n";
  for (const auto& e : table.ranked()) {
    os << e.algorithm << ',' << fmt_double(e.rating) << ',' << e.matches << ',' << e.wins << ','
       << e.draws << ',' << e.losses << '\n';
  }
  return os.str();
}

std::string eaf_csv(const std::string& algorithm, const EafGrid& grid) {
  std::ostringstream os;
  const auto curve = eaf_curve(grid);
  for (std::size_t bi = 0; bi < grid.budgets.size(); ++bi) {
    os << algorithm << ',' << grid.budgets[bi] << ',' << fmt_double(curve[bi]) << '\n';
  }
  return os.str();
}

}  // namespace blade
