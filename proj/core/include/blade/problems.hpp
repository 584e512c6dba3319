#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blade/util.hpp"

namespace blade {

enum class FunctionGroup {
  Separable,
  LowModerateConditioning,
  HighConditioningUnimodal,
  MultimodalAdequateStructure,
  MultimodalWeakStructure,
};

/// Stable token used in serialized records ("separable", ...).
std::string_view to_token(FunctionGroup g);
FunctionGroup group_from_token(std::string_view token);

/// Human-facing group name ("Separable Functions", ...), as used in prompts.
std::string_view group_display_name(FunctionGroup g);

/// One raw benchmark function. The evaluator is the untransformed form with
/// minimum value exactly 0 at canonical_optimum(d); instances translate,
/// rotate and offset it.
struct BenchmarkFunction {
  int fid = 0;
  std::string name;
  FunctionGroup group = FunctionGroup::Separable;
  std::string description;  // landscape prose, surfaced in prompts
  std::function<double(const Eigen::VectorXd&)> evaluator;
  std::function<Eigen::VectorXd(int)> canonical_optimum;
};

class FunctionRegistry {
 public:
  /// The built-in function set spanning all five groups.
  static const FunctionRegistry& shared();
  static FunctionRegistry standard();

  void add(BenchmarkFunction fn);
  bool contains(int fid) const { return functions_.count(fid) != 0; }
  const BenchmarkFunction& by_fid(int fid) const;
  std::vector<int> fids() const;
  std::vector<int> fids_in_group(FunctionGroup g) const;

 private:
  std::map<int, BenchmarkFunction> functions_;
};

struct Bounds {
  Eigen::VectorXd lower, upper;

  static Bounds symmetric(int dimension, double half_width = 5.0);
  int dimension() const { return static_cast<int>(lower.size()); }
  bool contains(const Eigen::VectorXd& x) const;
  Eigen::VectorXd clip(const Eigen::VectorXd& x) const;
};

enum class SuiteKind { Sbox, Mabbob };
enum class Role { Train, Test, Validation };

std::string_view to_token(SuiteKind k);
std::string_view to_token(Role r);
Role role_from_token(std::string_view token);

/// One concrete transformed realization of a benchmark function (or an
/// affine combination of several). Immutable after construction; safe to
/// share across evaluation workers.
struct ProblemInstance {
  SuiteKind kind = SuiteKind::Sbox;
  std::vector<int> fids;         // single entry for plain instances
  std::vector<double> weights;   // aligned with fids; {1.0} for plain
  int dimension = 0;
  Bounds bounds;
  std::vector<Eigen::MatrixXd> rotations;  // one orthogonal matrix per component
  Eigen::VectorXd x_opt;
  double f_opt = 0.0;
  std::uint64_t instance_seed = 0;
  Role role = Role::Train;
  std::string description;
  std::string id;
};

/// Evaluates the instance at x. Out-of-box queries are clipped and charged a
/// quadratic distance penalty of 1e4 per squared unit of violation, so every
/// query stays finite and feasibility is strongly preferred.
double evaluate(const FunctionRegistry& registry, const ProblemInstance& inst,
                const Eigen::VectorXd& x);
double evaluate(const ProblemInstance& inst, const Eigen::VectorXd& x);

/// Seeded instance generation: x_opt uniform over the box interior (1% margin
/// per face), rotation from QR of a standard normal matrix, f_opt uniform in
/// [-100, 100]. Pure function of (fid, dimension, instance_seed).
ProblemInstance generate_instance(const FunctionRegistry& registry, int fid, int dimension,
                                  std::uint64_t instance_seed, Role role = Role::Train);
ProblemInstance generate_instance(int fid, int dimension, std::uint64_t instance_seed,
                                  Role role = Role::Train);

/// Affine combination F(x) = sum_i w_i * s(e_i(x)) with a shared sampled
/// optimum, per-component rotations, component error e_i >= 0 and the clipped
/// log scaling s(e) = clip(log10(e + 1e-12), -12, 10) - log10(1e-12).
/// F(x_opt) = 0 and the combined f_opt is 0.
ProblemInstance generate_mabbob_instance(const FunctionRegistry& registry,
                                         const std::vector<int>& fids,
                                         const std::vector<double>& weights, int dimension,
                                         std::uint64_t instance_seed, Role role = Role::Train);
ProblemInstance generate_mabbob_instance(const std::vector<int>& fids,
                                         const std::vector<double>& weights, int dimension,
                                         std::uint64_t instance_seed, Role role = Role::Train);

struct RoleCounts {
  int train = 0;
  int test = 0;
  int validation = 0;
};

struct SuiteSpec {
  SuiteKind kind = SuiteKind::Mabbob;
  int dimension = 5;
  std::vector<int> fids;                   // sbox: explicit fid list (empty = use group or all)
  std::optional<FunctionGroup> group;      // sbox: group filter
  RoleCounts counts{20, 50, 0};            // sbox: per fid; mabbob: suite totals
  std::uint64_t master_seed = 0;
  int components = 2;                      // mabbob: functions per affine instance

  std::string id() const;
  void validate(const FunctionRegistry& registry = FunctionRegistry::shared()) const;
  /// The fids this spec draws from, after group filtering.
  std::vector<int> resolve_fids(const FunctionRegistry& registry) const;
};

struct SuiteSplit {
  std::vector<ProblemInstance> train, test, validation;
};

/// Role-disjoint instance lists, deterministic from the master seed.
/// The instance seed of item k of role r is
///   seed_mix(kind, fid-list hash, role, k, master_seed).
SuiteSplit suite_split(const FunctionRegistry& registry, const SuiteSpec& spec);
SuiteSplit suite_split(const SuiteSpec& spec);

/// Problem text for prompts: dimension, bounds and a "{budget}" placeholder.
/// With include_description, adds the landscape prose of every component
/// function; never reveals x_opt or f_opt.
std::string describe(const FunctionRegistry& registry, const ProblemInstance& inst,
                     bool include_description);
std::string describe(const ProblemInstance& inst, bool include_description);

/// Line-delimited instance records, lossless for doubles (shortest
/// round-trip decimal).
std::string instance_to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const std::string& line);
void write_instances(std::ostream& out, const std::vector<ProblemInstance>& instances);
std::vector<ProblemInstance> read_instances(std::istream& in);

}  // namespace blade
