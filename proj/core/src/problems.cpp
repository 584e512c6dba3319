#include "blade/problems.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <numbers>
#include <ostream>
#include <sstream>

#include "blade/rng.hpp"

namespace blade {
namespace {

using json = nlohmann::json;

// Seed sub-stream tags for instance construction.
constexpr std::uint64_t kTagXopt = 0x01;
constexpr std::uint64_t kTagRotation = 0x02;
constexpr std::uint64_t kTagFopt = 0x03;
constexpr std::uint64_t kTagSuiteItem = 0x04;
constexpr std::uint64_t kTagMabbobSample = 0x05;
constexpr std::uint64_t kTagGallagher = 0x06;

double axis_scale(double base_exp, int i, int d) {
  if (d <= 1) return 1.0;
  return std::pow(10.0, base_exp * static_cast<double>(i) / static_cast<double>(d - 1));
}

// Gallagher peak table, a pure function of (fid, peak count, dimension).
// Cached so instances stay cheap to evaluate and safe to share across threads.
struct GallagherPeaks {
  Eigen::MatrixXd centers;  // n x d
  Eigen::MatrixXd scales;   // n x d, diagonal metric per peak
  Eigen::VectorXd heights;  // n
};

std::shared_ptr<const GallagherPeaks> gallagher_peaks(int fid, int n, int d) {
  const auto key = std::pair(fid, d);
  thread_local std::pair<int, int> cached_key{-1, -1};
  thread_local std::shared_ptr<const GallagherPeaks> cached;
  if (cached_key == key && cached) return cached;

  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const GallagherPeaks>> table;
  std::lock_guard lock(mu);
  auto it = table.find(key);
  if (it == table.end()) {
    auto peaks = std::make_shared<GallagherPeaks>();
    peaks->centers.resize(n, d);
    peaks->scales.resize(n, d);
    peaks->heights.resize(n);
    Rng rng(seed_mix({static_cast<std::uint64_t>(fid), static_cast<std::uint64_t>(d),
                      kTagGallagher}));
    for (int i = 0; i < n; ++i) {
      const bool global = i == 0;
      peaks->heights(i) = global ? 10.0 : 1.1 + 8.0 * static_cast<double>(i - 1) / (n - 2);
      const double cond = global ? 1000.0 : std::pow(1000.0, rng.uniform());
      for (int j = 0; j < d; ++j) {
        peaks->centers(i, j) = global ? 0.0 : rng.uniform(-4.0, 4.0);
        peaks->scales(i, j) =
            std::pow(cond, static_cast<double>(j) / std::max(1, d - 1)) / std::pow(cond, 0.25);
      }
      // Random axis assignment of the conditioning profile.
      for (int j = d - 1; j > 0; --j) {
        const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(j + 1)));
        std::swap(peaks->scales(i, j), peaks->scales(i, k));
      }
    }
    it = table.emplace(key, std::move(peaks)).first;
  }
  cached_key = key;
  cached = it->second;
  return cached;
}

Eigen::VectorXd zeros(int d) { return Eigen::VectorXd::Zero(d); }

double raw_sphere(const Eigen::VectorXd& z) { return z.squaredNorm(); }

double raw_ellipsoid(const Eigen::VectorXd& z) {
  const int d = static_cast<int>(z.size());
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += axis_scale(6.0, i, d) * z(i) * z(i);
  return s;
}

double raw_linear_slope(const Eigen::VectorXd& z) {
  const int d = static_cast<int>(z.size());
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += axis_scale(1.0, i, d) * std::abs(z(i));
  return s;
}

double raw_attractive_sector(const Eigen::VectorXd& z) {
  double s = 0.0;
  for (int i = 0; i < z.size(); ++i) {
    const double v = z(i) > 0.0 ? 100.0 * z(i) : z(i);
    s += v * v;
  }
  return s;
}

double raw_rosenbrock(const Eigen::VectorXd& z) {
  double s = 0.0;
  for (int i = 0; i + 1 < z.size(); ++i) {
    const double a = z(i) * z(i) - z(i + 1);
    const double b = z(i) - 1.0;
    s += 100.0 * a * a + b * b;
  }
  return s;
}

double raw_discus(const Eigen::VectorXd& z) {
  double s = 1e6 * z(0) * z(0);
  for (int i = 1; i < z.size(); ++i) s += z(i) * z(i);
  return s;
}

double raw_sharp_ridge(const Eigen::VectorXd& z) {
  double tail = 0.0;
  for (int i = 1; i < z.size(); ++i) tail += z(i) * z(i);
  return z(0) * z(0) + 100.0 * std::sqrt(tail);
}

double raw_rastrigin(const Eigen::VectorXd& z) {
  const double two_pi = 2.0 * std::numbers::pi;
  double cos_sum = 0.0;
  for (int i = 0; i < z.size(); ++i) cos_sum += std::cos(two_pi * z(i));
  return 10.0 * (static_cast<double>(z.size()) - cos_sum) + z.squaredNorm();
}

double raw_schaffers_f7(const Eigen::VectorXd& z) {
  const int d = static_cast<int>(z.size());
  double acc = 0.0;
  for (int i = 0; i + 1 < d; ++i) {
    const double s = std::sqrt(z(i) * z(i) + z(i + 1) * z(i + 1));
    const double sq = std::sqrt(s);
    const double sn = std::sin(50.0 * std::pow(s, 0.2));
    acc += sq + sq * sn * sn;
  }
  acc /= static_cast<double>(d - 1);
  return acc * acc;
}

double raw_gallagher(int fid, int n, const Eigen::VectorXd& z) {
  const int d = static_cast<int>(z.size());
  const auto peaks = gallagher_peaks(fid, n, d);
  double best = 0.0;
  for (int i = 0; i < peaks->heights.size(); ++i) {
    double q = 0.0;
    for (int j = 0; j < d; ++j) {
      const double dz = z(j) - peaks->centers(i, j);
      q += peaks->scales(i, j) * dz * dz;
    }
    best = std::max(best, peaks->heights(i) * std::exp(-q / (2.0 * d)));
  }
  const double g = 10.0 - best;
  return g * g;
}

// Single-coordinate Schwefel ridge term and its frozen peak location/value.
// Valid as a raw function while the reachable |z| stays below the next outer
// peak (~|z| < 290), which holds for every in-box query up to d ~ 80.
constexpr double kSchwefelOpt = 420.96874635998205;
constexpr double kSchwefelPeak = 418.98288727243369;

double raw_schwefel(const Eigen::VectorXd& z) {
  double s = 0.0;
  for (int i = 0; i < z.size(); ++i) {
    const double t = z(i) + kSchwefelOpt;
    s += kSchwefelPeak - t * std::sin(std::sqrt(std::abs(t)));
  }
  return s;
}

double raw_katsuura(const Eigen::VectorXd& z) {
  const int d = static_cast<int>(z.size());
  const double exponent = 10.0 / std::pow(d, 1.2);
  double prod = 1.0;
  for (int i = 0; i < d; ++i) {
    double inner = 0.0;
    double p = 1.0;
    for (int j = 1; j <= 32; ++j) {
      p *= 2.0;
      const double v = p * z(i);
      inner += std::abs(v - std::round(v)) / p;
    }
    prod *= std::pow(1.0 + (i + 1) * inner, exponent);
  }
  const double scale = 10.0 / (d * d);
  return scale * prod - scale;
}

double raw_lunacek(const Eigen::VectorXd& z) {
  const int d = static_cast<int>(z.size());
  const double mu0 = 2.5;
  const double s = 1.0 - 1.0 / (2.0 * std::sqrt(d + 20.0) - 8.2);
  const double mu1 = -std::sqrt((mu0 * mu0 - 1.0) / s);
  const double two_pi = 2.0 * std::numbers::pi;
  double sum0 = 0.0, sum1 = 0.0, cos_sum = 0.0;
  for (int i = 0; i < d; ++i) {
    const double a = z(i) - mu0;
    const double b = z(i) - mu1;
    sum0 += a * a;
    sum1 += b * b;
    cos_sum += std::cos(two_pi * a);
  }
  return std::min(sum0, d + s * sum1) + 10.0 * (d - cos_sum);
}

// MA-BBOB component scaling: nonnegative, zero at zero error.
double mabbob_scale(double error) {
  static const double log_eps = std::log10(1e-12);
  const double v = std::log10(error + 1e-12);
  return std::clamp(v, -12.0, 10.0) - log_eps;
}

Eigen::MatrixXd random_rotation(int d, Rng& rng) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ();
}

Eigen::VectorXd sample_x_opt(const Bounds& bounds, Rng& rng) {
  const int d = bounds.dimension();
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) {
    const double width = bounds.upper(i) - bounds.lower(i);
    const double margin = 0.01 * width;
    x(i) = rng.uniform(bounds.lower(i) + margin, bounds.upper(i) - margin);
  }
  return x;
}

std::string seed_hex(std::uint64_t seed) {
  std::ostringstream os;
  os << std::hex << seed;
  return os.str();
}

std::string make_instance_id(const ProblemInstance& inst) {
  std::ostringstream os;
  if (inst.kind == SuiteKind::Sbox) {
    os << "f" << inst.fids.front();
  } else {
    os << "ma";
    for (std::size_t i = 0; i < inst.fids.size(); ++i) os << (i ? "+" : "") << inst.fids[i];
  }
  os << "_d" << inst.dimension << "_i" << seed_hex(inst.instance_seed);
  return os.str();
}

std::uint64_t fid_list_hash(const std::vector<int>& fids) {
  std::uint64_t h = 0x9d8f3c1b;
  for (int f : fids) h = seed_mix({h, static_cast<std::uint64_t>(f)});
  return h;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<int>(i)) = a[i].get<double>();
  return v;
}

}  // namespace

std::string_view to_token(FunctionGroup g) {
  switch (g) {
    case FunctionGroup::Separable: return "separable";
    case FunctionGroup::LowModerateConditioning: return "low_moderate_conditioning";
    case FunctionGroup::HighConditioningUnimodal: return "high_conditioning_unimodal";
    case FunctionGroup::MultimodalAdequateStructure: return "multimodal_adequate_structure";
    case FunctionGroup::MultimodalWeakStructure: return "multimodal_weak_structure";
  }
  return "separable";
}

FunctionGroup group_from_token(std::string_view token) {
  for (auto g : {FunctionGroup::Separable, FunctionGroup::LowModerateConditioning,
                 FunctionGroup::HighConditioningUnimodal,
                 FunctionGroup::MultimodalAdequateStructure,
                 FunctionGroup::MultimodalWeakStructure}) {
    if (to_token(g) == token) return g;
  }
  throw InputError("unknown function group: '" + std::string(token) + "'");
}

std::string_view group_display_name(FunctionGroup g) {
  switch (g) {
    case FunctionGroup::Separable: return "Separable Functions";
    case FunctionGroup::LowModerateConditioning:
      return "Functions with low or moderate conditioning";
    case FunctionGroup::HighConditioningUnimodal:
      return "Functions with high conditioning and unimodal";
    case FunctionGroup::MultimodalAdequateStructure:
      return "Multi-modal functions with adequate global structure";
    case FunctionGroup::MultimodalWeakStructure:
      return "Multi-modal functions with weak global structure";
  }
  return "";
}

std::string_view to_token(SuiteKind k) { return k == SuiteKind::Sbox ? "sbox" : "mabbob"; }

std::string_view to_token(Role r) {
  switch (r) {
    case Role::Train: return "train";
    case Role::Test: return "test";
    case Role::Validation: return "validation";
  }
  return "train";
}

Role role_from_token(std::string_view token) {
  for (auto r : {Role::Train, Role::Test, Role::Validation})
    if (to_token(r) == token) return r;
  throw InputError("unknown role: '" + std::string(token) + "'");
}

void FunctionRegistry::add(BenchmarkFunction fn) {
  if (fn.fid <= 0) throw RegistryError("fid must be positive");
  if (!functions_.emplace(fn.fid, std::move(fn)).second)
    throw RegistryError("duplicate fid " + std::to_string(fn.fid));
}

const BenchmarkFunction& FunctionRegistry::by_fid(int fid) const {
  auto it = functions_.find(fid);
  if (it == functions_.end()) throw RegistryError("unknown fid " + std::to_string(fid));
  return it->second;
}

std::vector<int> FunctionRegistry::fids() const {
  std::vector<int> out;
  out.reserve(functions_.size());
  for (const auto& [fid, fn] : functions_) out.push_back(fid);
  return out;
}

std::vector<int> FunctionRegistry::fids_in_group(FunctionGroup g) const {
  std::vector<int> out;
  for (const auto& [fid, fn] : functions_)
    if (fn.group == g) out.push_back(fid);
  return out;
}

FunctionRegistry FunctionRegistry::standard() {
  FunctionRegistry reg;
  auto ones = [](int d) { return Eigen::VectorXd::Ones(d).eval(); };

  reg.add({1, "Sphere Function", FunctionGroup::Separable,
           "Perfectly smooth, unimodal and radially symmetric bowl; the gradient points "
           "straight at the optimum from everywhere.",
           raw_sphere, zeros});
  reg.add({2, "Separable Ellipsoidal Function", FunctionGroup::Separable,
           "Smooth unimodal quadratic bowl, separable per coordinate, with axis scales "
           "spanning six orders of magnitude.",
           raw_ellipsoid, zeros});
  reg.add({5, "Linear Slope", FunctionGroup::Separable,
           "Constant-slope landscape with no curvature: the value falls at a fixed "
           "per-coordinate rate toward the optimum, with later coordinates weighted more.",
           raw_linear_slope, zeros});
  reg.add({6, "Attractive Sector Function", FunctionGroup::LowModerateConditioning,
           "Smooth unimodal landscape that is highly asymmetric around the optimum: steps "
           "into one half-space cost four orders of magnitude more than their mirror images.",
           raw_attractive_sector, zeros});
  reg.add({8, "Rosenbrock Function", FunctionGroup::LowModerateConditioning,
           "A long curved narrow valley; reaching the optimum requires following the valley "
           "floor while continually changing direction.",
           raw_rosenbrock, ones});
  reg.add({11, "Discus Function", FunctionGroup::HighConditioningUnimodal,
           "Unimodal quadratic with one direction weighted a million times more than the "
           "rest; nearly flat in all other directions.",
           raw_discus, zeros});
  reg.add({13, "Sharp Ridge Function", FunctionGroup::HighConditioningUnimodal,
           "A sharp non-differentiable ridge must be followed to the optimum; the gradient "
           "is undefined on the crest itself.",
           raw_sharp_ridge, zeros});
  reg.add({15, "Rastrigin Function", FunctionGroup::MultimodalAdequateStructure,
           "Highly multimodal with a regular lattice of roughly 10^d local optima laid over "
           "a single global quadratic structure.",
           raw_rastrigin, zeros});
  reg.add({17, "Schaffers F7 Function", FunctionGroup::MultimodalAdequateStructure,
           "Highly multimodal with oscillation frequencies that vary across the domain; "
           "local optima are irregular in size and spacing.",
           raw_schaffers_f7, zeros});
  reg.add({20, "Schwefel Function", FunctionGroup::MultimodalWeakStructure,
           "Deep, distant local optima arranged so the second-best region lies far from the "
           "best one; little global structure to exploit.",
           raw_schwefel, zeros});
  reg.add({21, "Gallagher's Gaussian 101-me Peaks Function", FunctionGroup::MultimodalWeakStructure,
           "101 Gaussian peaks of varying height and conditioning placed at random in the "
           "domain; weak global structure, the optimum sits on the highest peak.",
           [](const Eigen::VectorXd& z) { return raw_gallagher(21, 101, z); }, zeros});
  reg.add({22, "Gallagher's Gaussian 21-hi Peaks Function", FunctionGroup::MultimodalWeakStructure,
           "21 strongly conditioned Gaussian peaks at random positions; the global optimum "
           "is only slightly better than the runners-up.",
           [](const Eigen::VectorXd& z) { return raw_gallagher(22, 21, z); }, zeros});
  reg.add({23, "Katsuura Function", FunctionGroup::MultimodalWeakStructure,
           "Fractal, extremely rugged landscape with more than 10^d local optima and no "
           "usable global trend.",
           raw_katsuura, zeros});
  reg.add({24, "Lunacek bi-Rastrigin Function", FunctionGroup::MultimodalWeakStructure,
           "Two competing funnels of local optima; the wider funnel does not contain the "
           "global optimum, punishing greedy basin choices.",
           raw_lunacek, [](int d) { return Eigen::VectorXd::Constant(d, 2.5).eval(); }});
  return reg;
}

const FunctionRegistry& FunctionRegistry::shared() {
  static const FunctionRegistry reg = standard();
  return reg;
}

Bounds Bounds::symmetric(int dimension, double half_width) {
  Bounds b;
  b.lower = Eigen::VectorXd::Constant(dimension, -half_width);
  b.upper = Eigen::VectorXd::Constant(dimension, half_width);
  return b;
}

bool Bounds::contains(const Eigen::VectorXd& x) const {
  for (int i = 0; i < x.size(); ++i)
    if (x(i) < lower(i) || x(i) > upper(i)) return false;
  return true;
}

Eigen::VectorXd Bounds::clip(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

double evaluate(const FunctionRegistry& registry, const ProblemInstance& inst,
                const Eigen::VectorXd& x) {
  if (static_cast<int>(x.size()) != inst.dimension)
    throw InputError("dimension mismatch: point has " + std::to_string(x.size()) +
                     " coordinates, instance expects " + std::to_string(inst.dimension));

  double penalty = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double below = inst.bounds.lower(i) - x(i);
    const double above = x(i) - inst.bounds.upper(i);
    const double dist = std::max({0.0, below, above});
    penalty += dist * dist;
  }
  penalty *= 1e4;

  const Eigen::VectorXd xc = inst.bounds.clip(x);
  const Eigen::VectorXd shifted = xc - inst.x_opt;

  if (inst.kind == SuiteKind::Sbox) {
    const auto& fn = registry.by_fid(inst.fids.front());
    const Eigen::VectorXd z =
        inst.rotations.front() * shifted + fn.canonical_optimum(inst.dimension);
    return fn.evaluator(z) + inst.f_opt + penalty;
  }

  double combined = 0.0;
  for (std::size_t c = 0; c < inst.fids.size(); ++c) {
    const auto& fn = registry.by_fid(inst.fids[c]);
    const Eigen::VectorXd z = inst.rotations[c] * shifted + fn.canonical_optimum(inst.dimension);
    combined += inst.weights[c] * mabbob_scale(fn.evaluator(z));
  }
  return combined + inst.f_opt + penalty;
}

double evaluate(const ProblemInstance& inst, const Eigen::VectorXd& x) {
  return evaluate(FunctionRegistry::shared(), inst, x);
}

ProblemInstance generate_instance(const FunctionRegistry& registry, int fid, int dimension,
                                  std::uint64_t instance_seed, Role role) {
  if (dimension < 2) throw InputError("dimension must be >= 2");
  const auto& fn = registry.by_fid(fid);

  ProblemInstance inst;
  inst.kind = SuiteKind::Sbox;
  inst.fids = {fid};
  inst.weights = {1.0};
  inst.dimension = dimension;
  inst.bounds = Bounds::symmetric(dimension);
  inst.instance_seed = instance_seed;
  inst.role = role;
  inst.description = fn.description;

  const std::uint64_t base = seed_mix({static_cast<std::uint64_t>(fid),
                                       static_cast<std::uint64_t>(dimension), instance_seed});
  Rng rng_xopt(seed_mix({base, kTagXopt}));
  inst.x_opt = sample_x_opt(inst.bounds, rng_xopt);
  Rng rng_rot(seed_mix({base, kTagRotation}));
  inst.rotations = {random_rotation(dimension, rng_rot)};
  Rng rng_fopt(seed_mix({base, kTagFopt}));
  inst.f_opt = rng_fopt.uniform(-100.0, 100.0);
  inst.id = make_instance_id(inst);
  return inst;
}

ProblemInstance generate_instance(int fid, int dimension, std::uint64_t instance_seed, Role role) {
  return generate_instance(FunctionRegistry::shared(), fid, dimension, instance_seed, role);
}

ProblemInstance generate_mabbob_instance(const FunctionRegistry& registry,
                                         const std::vector<int>& fids,
                                         const std::vector<double>& weights, int dimension,
                                         std::uint64_t instance_seed, Role role) {
  if (dimension < 2) throw InputError("dimension must be >= 2");
  if (fids.size() != weights.size() || fids.size() < 2)
    throw InputError("affine instance needs >= 2 components with matching weights");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw InputError("affine weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw InputError("affine weights must sum to 1");
  for (int fid : fids) registry.by_fid(fid);  // reject unknown fids up front

  ProblemInstance inst;
  inst.kind = SuiteKind::Mabbob;
  inst.fids = fids;
  inst.weights = weights;
  inst.dimension = dimension;
  inst.bounds = Bounds::symmetric(dimension);
  inst.instance_seed = instance_seed;
  inst.role = role;
  inst.f_opt = 0.0;

  const std::uint64_t base =
      seed_mix({fid_list_hash(fids), static_cast<std::uint64_t>(dimension), instance_seed});
  Rng rng_xopt(seed_mix({base, kTagXopt}));
  inst.x_opt = sample_x_opt(inst.bounds, rng_xopt);
  inst.rotations.reserve(fids.size());
  for (std::size_t c = 0; c < fids.size(); ++c) {
    Rng rng_rot(seed_mix({base, kTagRotation, static_cast<std::uint64_t>(c)}));
    inst.rotations.push_back(random_rotation(dimension, rng_rot));
  }

  std::ostringstream desc;
  desc << "Affine combination of " << fids.size() << " landscapes:";
  for (std::size_t c = 0; c < fids.size(); ++c) {
    desc << "\n- weight " << fmt_double(weights[c]) << ": " << registry.by_fid(fids[c]).description;
  }
  inst.description = desc.str();
  inst.id = make_instance_id(inst);
  return inst;
}

ProblemInstance generate_mabbob_instance(const std::vector<int>& fids,
                                         const std::vector<double>& weights, int dimension,
                                         std::uint64_t instance_seed, Role role) {
  return generate_mabbob_instance(FunctionRegistry::shared(), fids, weights, dimension,
                                  instance_seed, role);
}

std::string SuiteSpec::id() const {
  std::ostringstream os;
  os << to_token(kind);
  if (kind == SuiteKind::Sbox) {
    if (group) {
      os << "_g" << static_cast<int>(*group) + 1;
    } else if (!fids.empty()) {
      for (int f : fids) os << "_f" << f;
    }
  }
  os << "_d" << dimension;
  return os.str();
}

void SuiteSpec::validate(const FunctionRegistry& registry) const {
  if (dimension < 2) throw ConfigError("suite dimension must be >= 2");
  if (counts.train <= 0) throw ConfigError("suite needs at least one training instance");
  if (counts.test <= 0) throw ConfigError("suite needs at least one test instance");
  if (counts.validation < 0) throw ConfigError("validation count must be >= 0");
  for (int f : fids) registry.by_fid(f);
  if (kind == SuiteKind::Mabbob) {
    if (components < 2) throw ConfigError("affine instances need >= 2 components");
    if (static_cast<std::size_t>(components) > registry.fids().size())
      throw ConfigError("more affine components than registered functions");
  }
}

std::vector<int> SuiteSpec::resolve_fids(const FunctionRegistry& registry) const {
  if (!fids.empty()) return fids;
  if (group) return registry.fids_in_group(*group);
  return registry.fids();
}

SuiteSplit suite_split(const FunctionRegistry& registry, const SuiteSpec& spec) {
  spec.validate(registry);
  SuiteSplit split;
  const std::vector<int> pool = spec.resolve_fids(registry);
  if (pool.empty()) throw ConfigError("suite resolves to an empty function set");

  auto role_count = [&](Role r) {
    switch (r) {
      case Role::Train: return spec.counts.train;
      case Role::Test: return spec.counts.test;
      case Role::Validation: return spec.counts.validation;
    }
    return 0;
  };
  auto bucket = [&](Role r) -> std::vector<ProblemInstance>& {
    switch (r) {
      case Role::Train: return split.train;
      case Role::Test: return split.test;
      case Role::Validation: break;
    }
    return split.validation;
  };

  for (Role role : {Role::Train, Role::Test, Role::Validation}) {
    const int count = role_count(role);
    if (spec.kind == SuiteKind::Sbox) {
      for (int fid : pool) {
        for (int k = 0; k < count; ++k) {
          const std::uint64_t item_seed = seed_mix(
              {static_cast<std::uint64_t>(spec.kind), static_cast<std::uint64_t>(fid),
               static_cast<std::uint64_t>(role), static_cast<std::uint64_t>(k), spec.master_seed});
          bucket(role).push_back(
              generate_instance(registry, fid, spec.dimension, item_seed, role));
        }
      }
    } else {
      for (int k = 0; k < count; ++k) {
        const std::uint64_t item_seed = seed_mix(
            {static_cast<std::uint64_t>(spec.kind), fid_list_hash(pool),
             static_cast<std::uint64_t>(role), static_cast<std::uint64_t>(k), spec.master_seed});
        // Component fids and simplex-uniform weights come from a sampling
        // sub-stream of the item seed, keeping the public constructor pure.
        Rng rng(seed_mix({item_seed, kTagMabbobSample}));
        std::vector<int> candidates = pool;
        std::vector<int> fids;
        for (int c = 0; c < spec.components; ++c) {
          const std::size_t pick = rng.below(candidates.size());
          fids.push_back(candidates[pick]);
          candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        std::vector<double> weights(fids.size());
        double sum = 0.0;
        for (double& w : weights) {
          w = -std::log(1.0 - rng.uniform());
          sum += w;
        }
        for (double& w : weights) w /= sum;
        // Renormalize so the stored weights sum to 1 exactly enough for the
        // constructor's 1e-12 gate.
        bucket(role).push_back(generate_mabbob_instance(registry, fids, weights, spec.dimension,
                                                        item_seed, role));
      }
    }
  }
  return split;
}

SuiteSplit suite_split(const SuiteSpec& spec) {
  return suite_split(FunctionRegistry::shared(), spec);
}

std::string describe(const FunctionRegistry& registry, const ProblemInstance& inst,
                     bool include_description) {
  std::ostringstream os;
  os << "Minimize a black-box objective f: R^" << inst.dimension
     << " -> R subject to box constraints.\n";
  os << "dimension: " << inst.dimension << "\n";
  os << "bounds: " << fmt_double(inst.bounds.lower(0)) << " <= x_i <= "
     << fmt_double(inst.bounds.upper(0)) << " for every coordinate\n";
  os << "budget: {budget} function evaluations per run\n";
  if (include_description) {
    if (inst.kind == SuiteKind::Sbox) {
      const auto& fn = registry.by_fid(inst.fids.front());
      os << "landscape: " << fn.name << " — " << fn.description << "\n";
    } else {
      os << "landscape: " << inst.description << "\n";
    }
  }
  return os.str();
}

std::string describe(const ProblemInstance& inst, bool include_description) {
  return describe(FunctionRegistry::shared(), inst, include_description);
}

std::string instance_to_json(const ProblemInstance& inst) {
  json j;
  j["kind"] = std::string(to_token(inst.kind));
  j["fids"] = inst.fids;
  j["weights"] = inst.weights;
  j["dimension"] = inst.dimension;
  j["lower"] = vector_to_json(inst.bounds.lower);
  j["upper"] = vector_to_json(inst.bounds.upper);
  json rots = json::array();
  for (const auto& r : inst.rotations) {
    json rows = json::array();
    for (int i = 0; i < r.rows(); ++i)
      for (int c = 0; c < r.cols(); ++c) rows.push_back(r(i, c));
    rots.push_back(std::move(rows));
  }
  j["rotations"] = std::move(rots);
  j["x_opt"] = vector_to_json(inst.x_opt);
  j["f_opt"] = inst.f_opt;
  j["seed"] = inst.instance_seed;
  j["role"] = std::string(to_token(inst.role));
  j["description"] = inst.description;
  j["id"] = inst.id;
  return j.dump();
}

ProblemInstance instance_from_json(const std::string& line) {
  json j = json::parse(line);
  ProblemInstance inst;
  inst.kind = j.at("kind").get<std::string>() == "sbox" ? SuiteKind::Sbox : SuiteKind::Mabbob;
  inst.fids = j.at("fids").get<std::vector<int>>();
  inst.weights = j.at("weights").get<std::vector<double>>();
  inst.dimension = j.at("dimension").get<int>();
  inst.bounds.lower = vector_from_json(j.at("lower"));
  inst.bounds.upper = vector_from_json(j.at("upper"));
  for (const auto& rows : j.at("rotations")) {
    Eigen::MatrixXd r(inst.dimension, inst.dimension);
    int k = 0;
    for (int i = 0; i < inst.dimension; ++i)
      for (int c = 0; c < inst.dimension; ++c) r(i, c) = rows[k++].get<double>();
    inst.rotations.push_back(std::move(r));
  }
  inst.x_opt = vector_from_json(j.at("x_opt"));
  inst.f_opt = j.at("f_opt").get<double>();
  inst.instance_seed = j.at("seed").get<std::uint64_t>();
  inst.role = role_from_token(j.at("role").get<std::string>());
  inst.description = j.at("description").get<std::string>();
  inst.id = j.at("id").get<std::string>();
  return inst;
}

void write_instances(std::ostream& out, const std::vector<ProblemInstance>& instances) {
  for (const auto& inst : instances) out << instance_to_json(inst) << '\n';
}

std::vector<ProblemInstance> read_instances(std::istream& in) {
  std::vector<ProblemInstance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(instance_from_json(line));
  }
  return out;
}

}  // namespace blade
