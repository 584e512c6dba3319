#include "blade/candidates.hpp"

#include <unistd.h>

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "blade/subprocess.hpp"

namespace blade {
namespace {

using json = nlohmann::json;

std::string fmt_param(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  return fmt_double(v);
}

Eigen::VectorXd uniform_in_bounds(const Bounds& bounds, Rng& rng) {
  Eigen::VectorXd x(bounds.dimension());
  for (int i = 0; i < x.size(); ++i) x(i) = rng.uniform(bounds.lower(i), bounds.upper(i));
  return x;
}

double min_width(const Bounds& bounds) {
  return (bounds.upper - bounds.lower).minCoeff();
}

class RandomSearchSession final : public SolverSession {
 public:
  RandomSearchSession(int dimension, const Bounds& bounds, std::uint64_t seed)
      : bounds_(bounds), rng_(seed) {
    (void)dimension;
  }

  std::optional<Eigen::VectorXd> ask() override { return uniform_in_bounds(bounds_, rng_); }
  void tell(double) override {}

 private:
  Bounds bounds_;
  Rng rng_;
};

// (1+1)-ES with the 1/5th success rule: grow the step on success, shrink by
// the fourth root on failure.
class OnePlusOneEsSession final : public SolverSession {
 public:
  OnePlusOneEsSession(int dimension, const Bounds& bounds, std::uint64_t seed, double sigma0,
                      double alpha)
      : dim_(dimension), bounds_(bounds), rng_(seed), sigma_(sigma0), alpha_(alpha) {}

  std::optional<Eigen::VectorXd> ask() override {
    if (!have_parent_) {
      last_ = uniform_in_bounds(bounds_, rng_);
      return last_;
    }
    Eigen::VectorXd child(dim_);
    for (int i = 0; i < dim_; ++i) child(i) = parent_(i) + sigma_ * rng_.normal();
    last_ = child;
    return child;
  }

  void tell(double f) override {
    if (!have_parent_ || f < parent_f_) {
      parent_ = last_;
      parent_f_ = f;
      if (have_parent_) sigma_ *= alpha_;
      have_parent_ = true;
    } else {
      sigma_ *= std::pow(alpha_, -0.25);
    }
  }

 private:
  int dim_;
  Bounds bounds_;
  Rng rng_;
  double sigma_;
  double alpha_;
  Eigen::VectorXd parent_, last_;
  double parent_f_ = 0.0;
  bool have_parent_ = false;
};

// DE/rand/1/bin. The initial population consumes the first NP evaluations,
// then one trial per evaluation cycles over the population.
class DifferentialEvolutionSession final : public SolverSession {
 public:
  DifferentialEvolutionSession(int dimension, const Bounds& bounds, std::uint64_t seed, int np,
                               double f, double cr)
      : dim_(dimension), bounds_(bounds), rng_(seed), np_(np), f_(f), cr_(cr) {
    pop_.reserve(np_);
    values_.reserve(np_);
  }

  std::optional<Eigen::VectorXd> ask() override {
    if (static_cast<int>(pop_.size()) < np_) {
      last_ = uniform_in_bounds(bounds_, rng_);
      return last_;
    }
    const int i = target_;
    int r1, r2, r3;
    do r1 = static_cast<int>(rng_.below(np_)); while (r1 == i);
    do r2 = static_cast<int>(rng_.below(np_)); while (r2 == i || r2 == r1);
    do r3 = static_cast<int>(rng_.below(np_)); while (r3 == i || r3 == r1 || r3 == r2);

    Eigen::VectorXd trial = pop_[i];
    const int j_rand = static_cast<int>(rng_.below(dim_));
    for (int j = 0; j < dim_; ++j) {
      if (j == j_rand || rng_.uniform() < cr_)
        trial(j) = pop_[r1](j) + f_ * (pop_[r2](j) - pop_[r3](j));
    }
    last_ = trial;
    return trial;
  }

  void tell(double f) override {
    if (static_cast<int>(pop_.size()) < np_) {
      pop_.push_back(last_);
      values_.push_back(f);
      return;
    }
    if (f <= values_[target_]) {
      pop_[target_] = last_;
      values_[target_] = f;
    }
    target_ = (target_ + 1) % np_;
  }

 private:
  int dim_;
  Bounds bounds_;
  Rng rng_;
  int np_;
  double f_, cr_;
  std::vector<Eigen::VectorXd> pop_;
  std::vector<double> values_;
  Eigen::VectorXd last_;
  int target_ = 0;
};

// --- external candidates over the line-delimited JSON ask-tell protocol ---

class TempSourceFile {
 public:
  explicit TempSourceFile(const std::string& source) {
    static std::atomic<unsigned> counter{0};
    const auto dir = std::filesystem::temp_directory_path();
    path_ = dir / ("blade_candidate_" + std::to_string(::getpid()) + "_" +
                   std::to_string(counter.fetch_add(1)) + ".txt");
    std::ofstream out(path_);
    if (!out) throw SpawnError("cannot write candidate source to " + path_.string());
    out << source;
  }
  ~TempSourceFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

class ExternalSession final : public SolverSession {
 public:
  ExternalSession(const ExternalSpec& spec, int dimension, const Bounds& bounds, int budget,
                  std::uint64_t seed, double timeout_seconds)
      : dim_(dimension),
        deadline_(now() + timeout_seconds) {
    std::vector<std::string> argv = spec.launch.argv;
    for (auto& arg : argv) {
      const auto pos = arg.find("{source}");
      if (pos != std::string::npos) {
        if (!source_file_) source_file_ = std::make_unique<TempSourceFile>(spec.source);
        arg = arg.substr(0, pos) + source_file_->path().string() + arg.substr(pos + 8);
      }
    }
    process_ = std::make_unique<Subprocess>(Subprocess::spawn(argv));

    json init;
    init["type"] = "init";
    init["dim"] = dimension;
    init["lower"] = std::vector<double>(bounds.lower.data(), bounds.lower.data() + dimension);
    init["upper"] = std::vector<double>(bounds.upper.data(), bounds.upper.data() + dimension);
    init["budget"] = budget;
    init["seed"] = seed;
    if (!process_->write_line(init.dump(), remaining()))
      throw ProtocolError("candidate closed its input before init");
  }

  std::optional<Eigen::VectorXd> ask() override {
    const auto line = process_->read_line(remaining());
    if (!line) throw ProtocolError("candidate ended its output mid-session");
    json msg;
    try {
      msg = json::parse(*line);
    } catch (const json::exception&) {
      throw ProtocolError("malformed message from candidate: " + preview(*line));
    }
    const std::string type = msg.value("type", "");
    if (type == "done") {
      done_ = true;
      return std::nullopt;
    }
    if (type != "ask") throw ProtocolError("unexpected message type '" + type + "'");
    if (!msg.contains("x") || !msg["x"].is_array())
      throw ProtocolError("ask message without point array");
    const auto& arr = msg["x"];
    if (static_cast<int>(arr.size()) != dim_)
      throw ProtocolError("dimension mismatch: candidate asked a " + std::to_string(arr.size()) +
                          "-vector on a " + std::to_string(dim_) + "-d instance");
    Eigen::VectorXd x(dim_);
    for (int i = 0; i < dim_; ++i) {
      if (!arr[i].is_number()) throw ProtocolError("non-numeric coordinate in ask");
      x(i) = arr[i].get<double>();
    }
    return x;
  }

  void tell(double f) override {
    json msg;
    msg["type"] = "tell";
    msg["f"] = f;
    if (!process_->write_line(msg.dump(), remaining()))
      throw ProtocolError("candidate stopped reading tells");
  }

  void finish() override {
    if (!process_) return;
    if (!done_) {
      try {
        process_->write_line(R"({"type":"stop"})", 0.2);
      } catch (const std::exception&) {
        // already gone
      }
    }
    process_->terminate(kStopGraceSeconds);
  }

 private:
  static constexpr double kStopGraceSeconds = 2.0;

  static double now() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }
  double remaining() const {
    const double r = deadline_ - now();
    if (r <= 0.0) throw TimeoutError("candidate exceeded its wall-clock allowance");
    return r;
  }
  static std::string preview(const std::string& line) {
    return line.size() <= 40 ? line : line.substr(0, 40) + "...";
  }

  int dim_;
  double deadline_;
  std::unique_ptr<TempSourceFile> source_file_;
  std::unique_ptr<Subprocess> process_;
  bool done_ = false;
};

}  // namespace

double ParamRange::clamp(double v) const {
  double out = std::min(std::max(v, lo), hi);
  if (lo_open && out <= lo) out = integral ? lo + 1.0 : lo + 1e-6 * (hi - lo);
  if (integral) out = std::max(std::round(out), lo_open ? lo + 1.0 : lo);
  return out;
}

const std::map<std::string, ParamRange>& solver_param_ranges(SolverFamily family) {
  static const std::map<std::string, ParamRange> none{};
  static const std::map<std::string, ParamRange> one_plus_one{
      {"sigma0", {0.0, 5.0, false, true}},
      {"alpha", {1.0, 4.0, false, true}},
  };
  static const std::map<std::string, ParamRange> de{
      {"NP", {4.0, 200.0, true, false}},
      {"F", {0.0, 2.0, false, true}},
      {"CR", {0.0, 1.0, false, false}},
  };
  static const std::map<std::string, ParamRange> cma{
      {"lambda", {4.0, 256.0, true, false}},
      {"sigma0", {0.0, 5.0, false, true}},
  };
  switch (family) {
    case SolverFamily::RandomSearch: return none;
    case SolverFamily::OnePlusOneES: return one_plus_one;
    case SolverFamily::DifferentialEvolution: return de;
    case SolverFamily::CmaEs: return cma;
  }
  return none;
}

std::string_view to_token(SolverFamily f) {
  switch (f) {
    case SolverFamily::RandomSearch: return "RandomSearch";
    case SolverFamily::OnePlusOneES: return "OnePlusOneES";
    case SolverFamily::DifferentialEvolution: return "DifferentialEvolution";
    case SolverFamily::CmaEs: return "CmaEs";
  }
  return "RandomSearch";
}

SolverFamily family_from_token(std::string_view token) {
  for (auto f : {SolverFamily::RandomSearch, SolverFamily::OnePlusOneES,
                 SolverFamily::DifferentialEvolution, SolverFamily::CmaEs})
    if (to_token(f) == token) return f;
  throw ConfigError("unknown solver family: '" + std::string(token) + "'");
}

std::string_view to_token(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::Pending: return "pending";
    case CandidateStatus::Evaluated: return "evaluated";
    case CandidateStatus::Failed: return "failed";
  }
  return "pending";
}

CandidateStatus candidate_status_from_token(std::string_view token) {
  for (auto s : {CandidateStatus::Pending, CandidateStatus::Evaluated, CandidateStatus::Failed})
    if (to_token(s) == token) return s;
  throw InputError("unknown candidate status: '" + std::string(token) + "'");
}

std::string SolverConfig::canonical() const {
  std::string out{to_token(family)};
  out.push_back('(');
  bool first = true;
  for (const auto& [key, value] : params) {
    if (!first) out.push_back(',');
    first = false;
    out += key;
    out.push_back('=');
    out += fmt_param(value);
  }
  out.push_back(')');
  return out;
}

std::optional<SolverConfig> SolverConfig::parse(std::string_view text) {
  std::string_view s = trim(text);
  const auto open = s.find('(');
  if (open == std::string_view::npos || s.empty() || s.back() != ')') return std::nullopt;

  SolverConfig config;
  try {
    config.family = family_from_token(trim(s.substr(0, open)));
  } catch (const ConfigError&) {
    return std::nullopt;
  }

  const std::string_view body = s.substr(open + 1, s.size() - open - 2);
  if (!trim(body).empty()) {
    for (const auto& piece : split(body, ',')) {
      const auto eq = piece.find('=');
      if (eq == std::string::npos) return std::nullopt;
      const std::string key{trim(std::string_view(piece).substr(0, eq))};
      const std::string_view value = trim(std::string_view(piece).substr(eq + 1));
      if (key.empty()) return std::nullopt;
      try {
        config.params[key] = parse_double(value);
      } catch (const InputError&) {
        return std::nullopt;
      }
    }
  }
  return config;
}

void SolverConfig::validate() const {
  const auto& ranges = solver_param_ranges(family);
  for (const auto& [key, value] : params) {
    const auto it = ranges.find(key);
    if (it == ranges.end())
      throw ConfigError("unknown parameter '" + key + "' for " + std::string(to_token(family)));
    const auto& r = it->second;
    if (!std::isfinite(value) || value > r.hi || value < r.lo ||
        (r.lo_open && value == r.lo))
      throw ConfigError("parameter '" + key + "' out of range for " +
                        std::string(to_token(family)) + ": " + fmt_double(value));
    if (r.integral && value != std::floor(value))
      throw ConfigError("parameter '" + key + "' must be an integer");
  }
}

double SolverConfig::get(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::string Candidate::payload_text() const {
  if (is_builtin()) return config().canonical();
  return external().source;
}

std::unique_ptr<SolverSession> make_builtin_session(const SolverConfig& config, int dimension,
                                                    const Bounds& bounds, int budget,
                                                    std::uint64_t seed) {
  (void)budget;
  config.validate();
  switch (config.family) {
    case SolverFamily::RandomSearch:
      return std::make_unique<RandomSearchSession>(dimension, bounds, seed);
    case SolverFamily::OnePlusOneES:
      return std::make_unique<OnePlusOneEsSession>(dimension, bounds, seed,
                                                   config.get("sigma0", 0.3 * min_width(bounds)),
                                                   config.get("alpha", 1.26));
    case SolverFamily::DifferentialEvolution: {
      const int np = static_cast<int>(
          config.get("NP", std::clamp(10.0 * dimension, 10.0, 200.0)));
      return std::make_unique<DifferentialEvolutionSession>(
          dimension, bounds, seed, np, config.get("F", 0.5), config.get("CR", 0.9));
    }
    case SolverFamily::CmaEs:
      return std::make_unique<CmaEsSession>(dimension, bounds, seed,
                                            static_cast<int>(config.get("lambda", 0.0)),
                                            config.get("sigma0", 0.0));
  }
  throw ConfigError("unhandled solver family");
}

std::unique_ptr<SolverSession> make_external_session(const ExternalSpec& spec, int dimension,
                                                     const Bounds& bounds, int budget,
                                                     std::uint64_t seed, double timeout_seconds) {
  return std::make_unique<ExternalSession>(spec, dimension, bounds, budget, seed, timeout_seconds);
}

std::unique_ptr<SolverSession> instantiate(const Candidate& candidate, int dimension,
                                           const Bounds& bounds, int budget, std::uint64_t seed,
                                           double timeout_seconds) {
  if (candidate.is_builtin())
    return make_builtin_session(candidate.config(), dimension, bounds, budget, seed);
  return make_external_session(candidate.external(), dimension, bounds, budget, seed,
                               timeout_seconds);
}

// --- CMA-ES ---

CmaEsSession::CmaEsSession(int dimension, const Bounds& bounds, std::uint64_t seed, int lambda,
                           double sigma0)
    : dim_(dimension), bounds_(bounds), rng_(seed) {
  lambda_ = lambda > 0 ? lambda : 4 + static_cast<int>(3.0 * std::log(dim_));
  mu_ = lambda_ / 2;
  weights_.resize(mu_);
  for (int i = 0; i < mu_; ++i)
    weights_(i) = std::log((lambda_ + 1) / 2.0) - std::log(i + 1.0);
  weights_ /= weights_.sum();
  mu_eff_ = 1.0 / weights_.squaredNorm();

  const double d = dim_;
  c_sigma_ = (mu_eff_ + 2.0) / (d + mu_eff_ + 5.0);
  d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (d + 1.0)) - 1.0) + c_sigma_;
  c_c_ = (4.0 + mu_eff_ / d) / (d + 4.0 + 2.0 * mu_eff_ / d);
  c1_ = 2.0 / ((d + 1.3) * (d + 1.3) + mu_eff_);
  c_mu_ = std::min(1.0 - c1_,
                   2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) / ((d + 2.0) * (d + 2.0) + mu_eff_));
  chi_n_ = std::sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));

  mean_ = uniform_in_bounds(bounds_, rng_);
  sigma0_ = sigma0 > 0.0 ? sigma0 : 0.3 * min_width(bounds_);
  sigma_ = sigma0_;
  path_sigma_ = Eigen::VectorXd::Zero(dim_);
  path_cov_ = Eigen::VectorXd::Zero(dim_);
  reset_distribution();
  resets_ = 0;  // the initial identity does not count as a recovery
}

void CmaEsSession::reset_distribution() {
  cov_ = Eigen::MatrixXd::Identity(dim_, dim_);
  eigen_basis_ = Eigen::MatrixXd::Identity(dim_, dim_);
  inv_sqrt_ = Eigen::MatrixXd::Identity(dim_, dim_);
  eigen_scale_ = Eigen::VectorXd::Ones(dim_);
  path_sigma_.setZero();
  path_cov_.setZero();
  if (!std::isfinite(sigma_) || sigma_ <= 0.0) sigma_ = sigma0_;
  ++resets_;
}

void CmaEsSession::decompose() {
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  if (!cov_.allFinite()) {
    reset_distribution();
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov_);
  if (solver.info() != Eigen::Success || solver.eigenvalues().minCoeff() <= 0.0 ||
      !std::isfinite(solver.eigenvalues().maxCoeff())) {
    reset_distribution();
    return;
  }
  eigen_basis_ = solver.eigenvectors();
  eigen_scale_ = solver.eigenvalues().cwiseSqrt();
  inv_sqrt_ = eigen_basis_ * eigen_scale_.cwiseInverse().asDiagonal() * eigen_basis_.transpose();
}

std::optional<Eigen::VectorXd> CmaEsSession::ask() {
  Eigen::VectorXd n(dim_);
  for (int i = 0; i < dim_; ++i) n(i) = rng_.normal();
  const Eigen::VectorXd y = eigen_basis_ * (eigen_scale_.asDiagonal() * n);
  pending_steps_.push_back(y);
  ++asked_in_gen_;
  return mean_ + sigma_ * y;
}

void CmaEsSession::tell(double f) {
  pending_values_.push_back(f);
  if (static_cast<int>(pending_values_.size()) >= lambda_) update_distribution();
}

void CmaEsSession::update_distribution() {
  std::vector<int> order(pending_values_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pending_values_[a] < pending_values_[b]; });

  Eigen::VectorXd y_w = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < mu_; ++i) y_w += weights_(i) * pending_steps_[order[i]];

  mean_ += sigma_ * y_w;

  path_sigma_ = (1.0 - c_sigma_) * path_sigma_ +
                std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * (inv_sqrt_ * y_w);
  sigma_ *= std::exp((c_sigma_ / d_sigma_) * (path_sigma_.norm() / chi_n_ - 1.0));

  ++generation_;
  const double expected_decay =
      std::sqrt(1.0 - std::pow(1.0 - c_sigma_, 2.0 * static_cast<double>(generation_)));
  const bool h_sigma =
      path_sigma_.norm() / expected_decay < (1.4 + 2.0 / (dim_ + 1.0)) * chi_n_;

  path_cov_ = (1.0 - c_c_) * path_cov_;
  if (h_sigma) path_cov_ += std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_) * y_w;

  const double delta_h = h_sigma ? 0.0 : c_c_ * (2.0 - c_c_);
  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(dim_, dim_);
  for (int i = 0; i < mu_; ++i) {
    const auto& y = pending_steps_[order[i]];
    rank_mu += weights_(i) * (y * y.transpose());
  }
  cov_ = (1.0 + c1_ * delta_h - c1_ - c_mu_) * cov_ + c1_ * (path_cov_ * path_cov_.transpose()) +
         c_mu_ * rank_mu;

  pending_steps_.clear();
  pending_values_.clear();
  asked_in_gen_ = 0;

  if (!std::isfinite(sigma_) || sigma_ <= 0.0 || !mean_.allFinite()) {
    reset_distribution();
    mean_ = mean_.allFinite() ? mean_ : uniform_in_bounds(bounds_, rng_);
    return;
  }
  decompose();
}

}  // namespace blade
