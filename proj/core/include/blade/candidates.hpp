#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "blade/problems.hpp"
#include "blade/rng.hpp"
#include "blade/util.hpp"

namespace blade {

/// External candidate misbehaved on the wire (malformed message, wrong
/// dimension, unexpected termination).
class ProtocolError : public BladeError {
 public:
  using BladeError::BladeError;
};

/// Candidate process could not be started.
class SpawnError : public BladeError {
 public:
  using BladeError::BladeError;
};

/// Candidate exceeded its wall-clock allowance.
class TimeoutError : public BladeError {
 public:
  using BladeError::BladeError;
};

enum class SolverFamily { RandomSearch, OnePlusOneES, DifferentialEvolution, CmaEs };

std::string_view to_token(SolverFamily f);
SolverFamily family_from_token(std::string_view token);

/// Valid range of one solver hyperparameter.
struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
  bool integral = false;
  bool lo_open = false;  // lower end excluded

  double clamp(double v) const;
};

/// The tunable parameters of a family with their documented ranges:
///   OnePlusOneES: sigma0 in (0, 5], alpha in (1, 4]
///   DifferentialEvolution: NP integer in [4, 200], F in (0, 2], CR in [0, 1]
///   CmaEs: lambda integer in [4, 256], sigma0 in (0, 5]
const std::map<std::string, ParamRange>& solver_param_ranges(SolverFamily family);

/// Parametric description of a built-in solver. Serializes canonically
/// (sorted keys, shortest round-trip numbers), so textual equality is
/// config equality. Missing parameters fall back to family defaults at
/// session creation.
struct SolverConfig {
  SolverFamily family = SolverFamily::RandomSearch;
  std::map<std::string, double> params;

  std::string canonical() const;
  /// Parses "Family(key=value,...)". Returns nullopt when the text is not in
  /// config syntax; throws ConfigError for a config with invalid content.
  static std::optional<SolverConfig> parse(std::string_view text);
  void validate() const;
  double get(const std::string& key, double fallback) const;
};

/// How to start an external candidate process. "{source}" in an argument
/// expands to the path of a temp file holding the candidate source text.
/// Arguments are passed verbatim to exec (no shell).
struct LaunchRecipe {
  std::vector<std::string> argv;
};

struct ExternalSpec {
  std::string source;
  LaunchRecipe launch;
};

enum class CandidateStatus { Pending, Evaluated, Failed };

std::string_view to_token(CandidateStatus s);
CandidateStatus candidate_status_from_token(std::string_view token);

/// One generated or configured optimizer inside an AAD run.
struct Candidate {
  int id = 0;
  std::string name;
  std::string description;
  std::variant<SolverConfig, ExternalSpec> payload;
  std::vector<int> parent_ids;
  int generation_index = 0;
  std::optional<int> prompt_id;
  std::optional<double> fitness;
  CandidateStatus status = CandidateStatus::Pending;

  bool is_builtin() const { return std::holds_alternative<SolverConfig>(payload); }
  const SolverConfig& config() const { return std::get<SolverConfig>(payload); }
  const ExternalSpec& external() const { return std::get<ExternalSpec>(payload); }
  /// Canonical config text for builtins, source text for externals.
  std::string payload_text() const;
};

/// Ask-tell session over one run. ask() yields the next point to evaluate or
/// nullopt when the candidate is done; every ask must be answered by exactly
/// one tell before the next ask.
class SolverSession {
 public:
  virtual ~SolverSession() = default;
  virtual std::optional<Eigen::VectorXd> ask() = 0;
  virtual void tell(double f) = 0;
  /// Called once when the harness stops the run (budget exhausted or abort).
  virtual void finish() {}
};

std::unique_ptr<SolverSession> make_builtin_session(const SolverConfig& config, int dimension,
                                                    const Bounds& bounds, int budget,
                                                    std::uint64_t seed);

/// Spawns the candidate process and speaks the line-delimited JSON ask-tell
/// protocol with it. Throws SpawnError when the recipe does not resolve.
std::unique_ptr<SolverSession> make_external_session(const ExternalSpec& spec, int dimension,
                                                     const Bounds& bounds, int budget,
                                                     std::uint64_t seed, double timeout_seconds);

/// Session for any candidate kind. Builtin sessions are pure functions of
/// (config, dimension, bounds, budget, seed).
std::unique_ptr<SolverSession> instantiate(const Candidate& candidate, int dimension,
                                           const Bounds& bounds, int budget, std::uint64_t seed,
                                           double timeout_seconds = 60.0);

/// (mu/mu_w, lambda) CMA-ES with rank-one and rank-mu covariance updates, no
/// restarts and no active update. Exposed as a concrete class so numerical
/// properties (covariance conditioning, reset behavior) are inspectable.
class CmaEsSession : public SolverSession {
 public:
  CmaEsSession(int dimension, const Bounds& bounds, std::uint64_t seed, int lambda = 0,
               double sigma0 = 0.0);

  std::optional<Eigen::VectorXd> ask() override;
  void tell(double f) override;

  const Eigen::MatrixXd& covariance() const { return cov_; }
  double sigma() const { return sigma_; }
  int covariance_resets() const { return resets_; }
  int lambda() const { return lambda_; }

 private:
  void update_distribution();
  void decompose();
  void reset_distribution();

  int dim_;
  Bounds bounds_;
  Rng rng_;
  int lambda_ = 0;
  int mu_ = 0;
  Eigen::VectorXd weights_;
  double mu_eff_ = 0.0;
  double c_sigma_ = 0.0, d_sigma_ = 0.0, c_c_ = 0.0, c1_ = 0.0, c_mu_ = 0.0;
  double chi_n_ = 0.0;

  Eigen::VectorXd mean_;
  double sigma_ = 0.0;
  double sigma0_ = 0.0;
  Eigen::MatrixXd cov_, eigen_basis_, inv_sqrt_;
  Eigen::VectorXd eigen_scale_;
  Eigen::VectorXd path_sigma_, path_cov_;
  long generation_ = 0;
  int resets_ = 0;

  std::vector<Eigen::VectorXd> pending_steps_;  // y_k of the current generation
  std::vector<double> pending_values_;
  int asked_in_gen_ = 0;
};

}  // namespace blade
