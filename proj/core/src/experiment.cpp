#include "blade/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "blade/rng.hpp"
#include "blade/version.hpp"

namespace blade {
namespace {

using json = nlohmann::json;

constexpr std::uint64_t kTagTrainSeed = 0x7261;
constexpr std::uint64_t kTagValidate = 0x76A1;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

long long wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw StoreError("cannot write " + path.string());
  out << text;
}

FunctionGroup group_from_number(long long n, int line) {
  if (n < 1 || n > 5)
    throw ConfigError("config line " + std::to_string(line) + ": group must be 1..5");
  return static_cast<FunctionGroup>(n - 1);
}

SuiteSpec parse_suite(const ConfigTable& t, std::uint64_t master_seed) {
  SuiteSpec suite;
  const std::string kind = t.require("kind").as_string();
  if (kind == "mabbob") suite.kind = SuiteKind::Mabbob;
  else if (kind == "sbox") suite.kind = SuiteKind::Sbox;
  else
    throw ConfigError("config line " + std::to_string(t.line) + ": unknown suite kind '" + kind +
                      "'");
  suite.dimension = static_cast<int>(t.get_int("dimension", 5));
  const bool sbox = suite.kind == SuiteKind::Sbox;
  suite.counts.train = static_cast<int>(t.get_int("train", sbox ? 5 : 20));
  suite.counts.test = static_cast<int>(t.get_int("test", sbox ? 10 : 50));
  suite.counts.validation = static_cast<int>(t.get_int("validation", 0));
  suite.components = static_cast<int>(t.get_int("components", 2));
  for (const long long fid : t.get_int_array("fids")) suite.fids.push_back(static_cast<int>(fid));
  if (const auto* g = t.find("group")) suite.group = group_from_number(g->as_int(), g->line);
  suite.master_seed = master_seed;
  return suite;
}

MethodSpec parse_method(const ConfigTable& t, const PromptSet& prompts) {
  MethodSpec method;
  method.name = t.require("name").as_string();
  const std::string kind = t.require("kind").as_string();
  if (kind == "baseline") {
    method.kind = MethodSpec::Kind::Baseline;
    const std::string solver = t.require("solver").as_string();
    auto config = SolverConfig::parse(solver);
    if (!config)
      throw ConfigError("config line " + std::to_string(t.line) + ": method '" + method.name +
                        "': unparseable solver '" + solver + "'");
    config->validate();
    method.baseline = std::move(*config);
    return method;
  }

  method.kind = MethodSpec::Kind::Aad;
  AadConfig& aad = method.aad;
  try {
    aad.method = aad_method_from_token(kind);
  } catch (const ConfigError& e) {
    throw ConfigError("config line " + std::to_string(t.line) + ": method '" + method.name +
                      "': " + e.what());
  }
  aad.name = method.name;
  aad.mu = static_cast<int>(t.get_int("mu", 4));
  aad.lambda = static_cast<int>(t.get_int("lambda", 12));
  aad.elitist = t.get_bool("elitist", false);
  aad.candidate_budget = static_cast<int>(t.get_int("candidate_budget", 100));
  aad.include_descriptions = t.get_bool("include_descriptions", true);
  const auto prompt_ids = t.get_int_array("mutation_prompts");
  if (!prompt_ids.empty()) {
    aad.mutation_prompt_ids.clear();
    for (const long long id : prompt_ids) aad.mutation_prompt_ids.push_back(static_cast<int>(id));
  }
  const std::string selection = t.get_string("prompt_selection", "single");
  aad.prompt_selection = prompt_selection_from_token(selection);
  aad.validate(prompts);
  return method;
}

LlmSpec parse_llm(const ConfigTable* t) {
  LlmSpec spec;
  if (!t) return spec;
  const std::string kind = t->get_string("kind", "mock");
  spec.temperature = t->get_double("temperature", 0.7);
  if (kind == "mock") {
    spec.kind = LlmSpec::Kind::Mock;
    spec.mock_seed = static_cast<std::uint64_t>(t->get_int("seed", 0));
    spec.model = t->get_string("model", "mock");
    return spec;
  }
  if (kind != "http")
    throw ConfigError("config line " + std::to_string(t->line) + ": unknown llm kind '" + kind +
                      "'");
  spec.kind = LlmSpec::Kind::Http;
  spec.model = t->require("model").as_string();
  spec.http.base_url = t->require("base_url").as_string();
  spec.http.path = t->get_string("path", spec.http.path);
  spec.http.api_key_env = t->get_string("api_key_env", spec.http.api_key_env);
  spec.http.request_timeout_seconds =
      t->get_double("request_timeout_seconds", spec.http.request_timeout_seconds);
  spec.http.requests_per_minute = t->get_double("requests_per_minute", 0.0);
  spec.http.prices.input_per_1k = t->get_double("price_input_per_1k", 0.0);
  spec.http.prices.output_per_1k = t->get_double("price_output_per_1k", 0.0);
  return spec;
}

struct AoccRow {
  std::string algorithm;
  std::string suite;
  std::string instance;
  int run = 0;
  std::uint64_t seed = 0;
  double aocc = 0.0;
  double final_error = 0.0;
};

std::string aocc_csv_header() { return "algorithm,suite,instance,run,seed,aocc,final_error"; }

std::string aocc_row_csv(const AoccRow& r) {
  std::ostringstream os;
  os << r.algorithm << ',' << r.suite << ',' << r.instance << ',' << r.run << ',' << r.seed << ','
     << fmt_double(r.aocc) << ',' << fmt_double(r.final_error);
  return os.str();
}

std::vector<AoccRow> read_aocc_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StoreError("missing " + path.string() + " (run `blade validate` first)");
  std::vector<AoccRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto parts = split(line, ',');
    if (parts.size() != 7) throw StoreError("malformed aocc.csv row: " + line);
    AoccRow r;
    r.algorithm = parts[0];
    r.suite = parts[1];
    r.instance = parts[2];
    r.run = std::stoi(parts[3]);
    r.seed = std::stoull(parts[4]);
    r.aocc = parse_double(parts[5]);
    r.final_error = parse_double(parts[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

ReportSamples report_samples_from_rows(const std::vector<AoccRow>& rows) {
  // sample = mean AOCC over a suite's instances for one validation run
  std::map<std::tuple<std::string, std::string, int>, std::pair<double, int>> acc;
  for (const auto& r : rows) {
    auto& slot = acc[{r.suite, r.algorithm, r.run}];
    slot.first += r.aocc;
    slot.second += 1;
  }
  ReportSamples samples;
  for (const auto& [key, sum_count] : acc) {
    samples[std::get<0>(key)][std::get<1>(key)].push_back(sum_count.first / sum_count.second);
  }
  return samples;
}

// (suite, algorithm) -> metric per shared cell, cells ordered by (instance, run)
std::map<std::string, OutcomeTable> outcome_tables_from_rows(const std::vector<AoccRow>& rows) {
  std::map<std::string, std::map<std::string, std::map<std::pair<std::string, int>, double>>> acc;
  for (const auto& r : rows) acc[r.suite][r.algorithm][{r.instance, r.run}] = r.aocc;

  std::map<std::string, OutcomeTable> tables;
  for (const auto& [suite, by_algo] : acc) {
    OutcomeTable table;
    const auto& first_cells = by_algo.begin()->second;
    for (const auto& [algo, cells] : by_algo) {
      if (cells.size() != first_cells.size())
        throw StoreError("aocc.csv: algorithms cover different cells in suite " + suite);
      table.algorithms.push_back(algo);
      std::vector<double> row;
      row.reserve(cells.size());
      for (const auto& [cell, value] : cells) row.push_back(value);
      table.metric.push_back(std::move(row));
    }
    tables[suite] = std::move(table);
  }
  return tables;
}

std::string sanitize_component(std::string name) {
  for (char& c : name)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  return name;
}

}  // namespace

Budget ExperimentConfig::budget_for(int dimension) const {
  if (budget_evaluations > 0) return Budget::evals(budget_evaluations);
  return Budget::evals(budget_multiplier * dimension);
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("experiment needs at least one method");
  if (suites.empty()) throw ConfigError("experiment needs at least one suite");
  if (runs_per_cell < 1) throw ConfigError("runs_per_cell must be >= 1");
  if (worker_count < 1) throw ConfigError("worker_count must be >= 1");
  if (validation_runs < 1) throw ConfigError("validation_runs must be >= 1");
  if (budget_evaluations <= 0 && budget_multiplier <= 0)
    throw ConfigError("evaluation budget must be positive");
  if (training_seeds_per_instance < 1)
    throw ConfigError("training_seeds_per_instance must be >= 1");
  std::set<std::string> names;
  for (const auto& m : methods) {
    if (m.name.empty()) throw ConfigError("every method needs a name");
    if (!names.insert(m.name).second) throw ConfigError("duplicate method name '" + m.name + "'");
    if (m.kind == MethodSpec::Kind::Aad) m.aad.validate(prompts);
    else m.baseline.validate();
  }
  std::set<std::string> suite_ids;
  for (const auto& s : suites) {
    s.validate();
    if (!suite_ids.insert(s.id()).second)
      throw ConfigError("duplicate suite '" + s.id() + "'");
  }
  if (llm.kind == LlmSpec::Kind::Http && llm.http.base_url.empty())
    throw ConfigError("http llm needs a base_url");
}

const MethodSpec& ExperimentConfig::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.name == name) return m;
  throw ConfigError("unknown method '" + name + "'");
}

ExperimentConfig parse_experiment_config(const std::string& toml_text) {
  const ConfigTable root = parse_config(toml_text);
  ExperimentConfig config;
  config.name = root.get_string("name", "experiment");
  config.master_seed = static_cast<std::uint64_t>(root.get_int("master_seed", 0));
  config.runs_per_cell = static_cast<int>(root.get_int("runs_per_cell", 10));
  config.worker_count = static_cast<int>(root.get_int("worker_count", 1));
  config.budget_multiplier = static_cast<int>(root.get_int("budget_multiplier", 2000));
  config.budget_evaluations = static_cast<int>(root.get_int("budget_evaluations", 0));
  config.training_seeds_per_instance =
      static_cast<int>(root.get_int("training_seeds_per_instance", 1));
  config.validation_runs = static_cast<int>(root.get_int("validation_runs", 10));
  config.run_timeout_seconds = root.get_double("run_timeout_seconds", 60.0);
  config.log_points = root.get_bool("log_points", false);
  config.output_dir = root.get_string("output_dir", "results/" + config.name);

  config.llm = parse_llm(root.table("llm"));
  if (const auto* llm = root.table("llm")) {
    config.llm_retry.max_attempts =
        static_cast<int>(llm->get_int("retry_attempts", config.llm_retry.max_attempts));
    config.llm_retry.initial_backoff_seconds =
        llm->get_double("retry_backoff_seconds", config.llm_retry.initial_backoff_seconds);
  }

  if (const auto* prompts = root.table("prompts")) {
    for (const auto& [key, value] : prompts->values) {
      try {
        config.prompts.set(std::stoi(key), value.as_string());
      } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(value.line) +
                          ": prompt ids must be integers, got '" + key + "'");
      }
    }
  }

  if (const auto* external = root.table("external")) {
    LaunchRecipe recipe;
    recipe.argv = external->get_string_array("launch");
    if (recipe.argv.empty())
      throw ConfigError("config line " + std::to_string(external->line) +
                        ": [external] needs a launch array");
    config.external_launch = std::move(recipe);
  }

  if (const auto* suites = root.table_array("suite"))
    for (const auto& t : *suites) config.suites.push_back(parse_suite(t, config.master_seed));
  if (const auto* methods = root.table_array("method"))
    for (const auto& t : *methods) config.methods.push_back(parse_method(t, config.prompts));

  if (const auto* aocc = root.table("aocc")) {
    config.aocc.lower_log = aocc->get_double("lower_log", config.aocc.lower_log);
    config.aocc.upper_log = aocc->get_double("upper_log", config.aocc.upper_log);
  }
  if (const auto* elo = root.table("elo")) {
    config.elo.k_factor = elo->get_double("k_factor", config.elo.k_factor);
    config.elo.initial_rating = elo->get_double("initial_rating", config.elo.initial_rating);
    config.elo.n_matches = elo->get_int("n_matches", config.elo.n_matches);
    config.elo.tournament_seed =
        static_cast<std::uint64_t>(elo->get_int("seed", static_cast<long long>(config.master_seed)));
  }

  config.validate();
  return config;
}

ExperimentConfig parse_experiment_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& method_name,
                        const std::string& suite_id, int run_index) {
  return seed_mix({master_seed, hash_text(method_name), hash_text(suite_id),
                   static_cast<std::uint64_t>(run_index)});
}

ResultsStore ResultsStore::create(const std::filesystem::path& root,
                                  const ExperimentConfig& config,
                                  const std::string& config_text) {
  namespace fs = std::filesystem;
  if (fs::exists(root / "manifest.json"))
    throw StoreError("results store already exists at " + root.string());
  fs::create_directories(root / "runs");
  fs::create_directories(root / "analysis");

  json manifest;
  manifest["blade_version"] = std::string(kBladeVersion);
  manifest["name"] = config.name;
  manifest["created_ms"] = wall_clock_ms();
  manifest["master_seed"] = config.master_seed;
  manifest["config_text"] = config_text;
  manifest["checksum"] =
      hex64(seed_mix({hash_text(config_text), hash_text(kBladeVersion)}));
  write_text_file(root / "manifest.json", manifest.dump(2) + "\n");

  ResultsStore store;
  store.root_ = root;
  store.config_text_ = config_text;
  return store;
}

ResultsStore ResultsStore::open(const std::filesystem::path& root) {
  std::ifstream in(root / "manifest.json");
  if (!in) throw StoreError("no manifest.json under " + root.string());
  json manifest = json::parse(in, nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("config_text"))
    throw StoreError("manifest.json under " + root.string() + " is unreadable");
  ResultsStore store;
  store.root_ = root;
  store.config_text_ = manifest["config_text"].get<std::string>();
  return store;
}

std::filesystem::path ResultsStore::cell_dir(const std::string& method, const std::string& suite,
                                             int run_index) const {
  return root_ / "runs" / sanitize_component(method) / sanitize_component(suite) /
         ("run_" + std::to_string(run_index));
}

bool ExperimentSummary::all_ok() const {
  return std::all_of(cells.begin(), cells.end(),
                     [](const CellResult& c) { return c.status == "ok"; });
}

std::vector<CellResult> ExperimentSummary::failures() const {
  std::vector<CellResult> out;
  for (const auto& c : cells)
    if (c.status != "ok") out.push_back(c);
  return out;
}

ExperimentSummary run_experiment(const ExperimentConfig& config, ResultsStore& store,
                                 const std::atomic<bool>* interrupt) {
  config.validate();
  namespace fs = std::filesystem;

  // Resolve suites once; instances are immutable and shared across workers.
  std::vector<SuiteSplit> splits;
  splits.reserve(config.suites.size());
  for (const auto& suite : config.suites) splits.push_back(suite_split(suite));

  const auto client = make_client(config.llm);

  struct Cell {
    int method_index, suite_index, run_index;
  };
  std::vector<Cell> cells;
  for (int m = 0; m < static_cast<int>(config.methods.size()); ++m)
    for (int s = 0; s < static_cast<int>(config.suites.size()); ++s)
      for (int r = 0; r < config.runs_per_cell; ++r) cells.push_back({m, s, r});

  ExperimentSummary summary;
  summary.cells.resize(cells.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      const auto& method = config.methods[cell.method_index];
      const auto& suite = config.suites[cell.suite_index];
      CellResult& result = summary.cells[i];
      result.method = method.name;
      result.suite = suite.id();
      result.run_index = cell.run_index;

      if (interrupt && interrupt->load()) {
        result.status = "aborted";
        continue;
      }
      try {
        const fs::path dir = store.cell_dir(method.name, suite.id(), cell.run_index);
        fs::create_directories(dir);
        const std::uint64_t seed =
            cell_seed(config.master_seed, method.name, suite.id(), cell.run_index);

        QueryLogger llm_log(dir / "llm_log.jsonl");
        DirectoryEvalLogSink eval_logs(dir / "evals", config.log_points);

        const auto& train = splits[cell.suite_index].train;
        const int dimension = suite.dimension;

        AadContext ctx;
        ctx.llm = client.get();
        ctx.prompts = &config.prompts;
        ctx.train_instances = train;
        ctx.train_seeds.clear();
        for (int j = 0; j < config.training_seeds_per_instance; ++j)
          ctx.train_seeds.push_back(seed_mix({seed, kTagTrainSeed, static_cast<std::uint64_t>(j)}));
        ctx.eval_budget = config.budget_for(dimension);
        ctx.aocc_params = config.aocc;
        ctx.run_options = RunOptions{config.run_timeout_seconds, config.log_points};
        ctx.eval_logs = &eval_logs;
        ctx.llm_log = &llm_log;
        ctx.model = config.llm.model;
        ctx.temperature = config.llm.temperature;
        ctx.retry = config.llm_retry;
        ctx.external_launch = config.external_launch;

        RunLineage lineage;
        if (method.kind == MethodSpec::Kind::Baseline) {
          Candidate baseline;
          baseline.id = 1;
          baseline.name = method.name;
          baseline.description = "human-designed baseline";
          baseline.payload = method.baseline;
          const double fitness =
              training_fitness(FunctionRegistry::shared(), baseline, train, ctx.train_seeds,
                               ctx.eval_budget, ctx.aocc_params, ctx.run_options, &eval_logs);
          baseline.fitness = fitness;
          baseline.status = fitness == kFailurePenaltyFitness ? CandidateStatus::Failed
                                                              : CandidateStatus::Evaluated;
          lineage.method_name = method.name;
          lineage.run_seed = seed;
          lineage.candidates.push_back(std::move(baseline));
        } else {
          lineage = run_aad(method.aad, ctx, seed);
        }
        write_lineage_file(dir / "lineage.jsonl", lineage);
        result.status = "ok";
      } catch (const std::exception& e) {
        result.status = "failed";
        result.error = e.what();
      }
    }
  };

  std::vector<std::thread> pool;
  const int workers = std::max(1, config.worker_count);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // Training convergence curves, aggregated in config order.
  std::ostringstream convergence;
  convergence << "method,suite,candidate_index,mean_best_fitness,runs\n";
  for (const auto& method : config.methods) {
    for (const auto& suite : config.suites) {
      std::vector<std::vector<double>> sequences;
      for (int r = 0; r < config.runs_per_cell; ++r) {
        const fs::path lineage_path =
            store.cell_dir(method.name, suite.id(), r) / "lineage.jsonl";
        if (!fs::exists(lineage_path)) continue;
        sequences.push_back(read_lineage_file(lineage_path).fitness_sequence());
      }
      if (sequences.empty()) continue;
      const auto curve = convergence_aggregate(sequences);
      for (std::size_t i = 0; i < curve.size(); ++i) {
        convergence << method.name << ',' << suite.id() << ',' << i + 1 << ','
                    << fmt_double(curve[i]) << ',' << sequences.size() << '\n';
      }
    }
  }
  write_text_file(store.analysis_dir() / "convergence.csv", convergence.str());

  json cells_json = json::array();
  for (const auto& c : summary.cells) {
    json entry;
    entry["method"] = c.method;
    entry["suite"] = c.suite;
    entry["run"] = c.run_index;
    entry["status"] = c.status;
    if (!c.error.empty()) entry["error"] = c.error;
    cells_json.push_back(std::move(entry));
  }
  json summary_json;
  summary_json["cells"] = std::move(cells_json);
  summary_json["all_ok"] = summary.all_ok();
  write_text_file(store.root() / "summary.json", summary_json.dump(2) + "\n");
  return summary;
}

std::vector<ValidationRow> validate_results(const ExperimentConfig& config, ResultsStore& store) {
  namespace fs = std::filesystem;
  std::vector<ValidationRow> rows;
  std::vector<AoccRow> aocc_rows;
  std::ostringstream eaf_csv_out;
  eaf_csv_out << "algorithm,suite,budget,attainment\n";
  std::ostringstream elo_csv_out;
  elo_csv_out << "suite,algorithm,rating,matches,wins,draws,losses\n";

  for (std::size_t suite_index = 0; suite_index < config.suites.size(); ++suite_index) {
    const auto& suite = config.suites[suite_index];
    const auto split = suite_split(suite);
    const auto& held_out = split.validation.empty() ? split.test : split.validation;
    if (held_out.empty()) throw ConfigError("suite " + suite.id() + " has no held-out instances");
    const Budget budget = config.budget_for(suite.dimension);

    // Best candidate per method: per-run select_best, then the best run.
    struct Selected {
      std::string method;
      Candidate candidate;
    };
    std::vector<Selected> algorithms;
    for (const auto& method : config.methods) {
      ValidationRow row;
      row.method = method.name;
      row.suite = suite.id();
      const Candidate* best = nullptr;
      RunLineage best_lineage;
      for (int r = 0; r < config.runs_per_cell; ++r) {
        const fs::path path = store.cell_dir(method.name, suite.id(), r) / "lineage.jsonl";
        if (!fs::exists(path)) continue;
        RunLineage lineage = read_lineage_file(path);
        try {
          const Candidate& candidate = select_best(lineage);
          if (!best || candidate.fitness.value() > best->fitness.value()) {
            best_lineage = std::move(lineage);
            best = &select_best(best_lineage);
          }
        } catch (const NoViableCandidateError&) {
          continue;
        }
      }
      if (best) {
        row.viable = true;
        row.best_name = best->name;
        row.best_payload = best->payload_text();
        row.best_training_fitness = best->fitness.value();
        algorithms.push_back({method.name, *best});
      }
      rows.push_back(std::move(row));
    }
    if (algorithms.empty()) continue;

    // Shared validation cells: (instance, run) pairs with common seeds.
    struct CellKey {
      const ProblemInstance* instance;
      int run;
      std::uint64_t seed;
    };
    std::vector<CellKey> cells;
    for (const auto& inst : held_out) {
      for (int r = 0; r < config.validation_runs; ++r) {
        cells.push_back({&inst, r,
                         seed_mix({config.master_seed, kTagValidate, hash_text(suite.id()),
                                   hash_text(inst.id), static_cast<std::uint64_t>(r)})});
      }
    }

    OutcomeTable outcomes;
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
      const auto& algo = algorithms[a];
      DirectoryEvalLogSink sink(
          store.analysis_dir() / "validation_evals" /
              (sanitize_component(algo.method) + "__" + sanitize_component(suite.id())),
          config.log_points);
      Candidate candidate = algo.candidate;
      candidate.id = static_cast<int>(a) + 1;

      std::vector<EvalTrace> traces;
      std::vector<double> metric;
      traces.reserve(cells.size());
      for (const auto& cell : cells) {
        EvalTrace trace =
            run_candidate(FunctionRegistry::shared(), candidate, *cell.instance, budget, cell.seed,
                          RunOptions{config.run_timeout_seconds, config.log_points}, &sink);
        const double score = trace.status == RunStatus::CandidateFailed
                                 ? kFailurePenaltyFitness
                                 : aocc(trace, budget, config.aocc);
        aocc_rows.push_back({algo.method, suite.id(), cell.instance->id, cell.run, cell.seed,
                             score, trace.best_f() - cell.instance->f_opt});
        metric.push_back(score);
        traces.push_back(std::move(trace));
      }
      outcomes.algorithms.push_back(algo.method);
      outcomes.metric.push_back(std::move(metric));

      const auto grid =
          eaf(traces, default_eaf_budgets(budget.max_evaluations), default_eaf_targets());
      const auto curve = eaf_curve(grid);
      for (std::size_t b = 0; b < grid.budgets.size(); ++b) {
        eaf_csv_out << algo.method << ',' << suite.id() << ',' << grid.budgets[b] << ','
                    << fmt_double(curve[b]) << '\n';
      }
    }

    if (outcomes.algorithms.size() >= 2) {
      const RatingTable table = elo_tournament(outcomes, config.elo);
      for (const auto& e : table.ranked()) {
        elo_csv_out << suite.id() << ',' << e.algorithm << ',' << fmt_double(e.rating) << ','
                    << e.matches << ',' << e.wins << ',' << e.draws << ',' << e.losses << '\n';
      }
    }
  }

  std::ostringstream aocc_csv_out;
  aocc_csv_out << aocc_csv_header() << '\n';
  for (const auto& r : aocc_rows) aocc_csv_out << aocc_row_csv(r) << '\n';
  write_text_file(store.analysis_dir() / "aocc.csv", aocc_csv_out.str());
  write_text_file(store.analysis_dir() / "eaf.csv", eaf_csv_out.str());
  write_text_file(store.analysis_dir() / "elo.csv", elo_csv_out.str());

  const ReportTable report = render_report(report_samples_from_rows(aocc_rows));
  write_text_file(store.analysis_dir() / "report.txt", report_to_text(report));
  write_text_file(store.analysis_dir() / "report.csv", report_to_csv(report));
  return rows;
}

void analyze_ceg(const ExperimentConfig& config, ResultsStore& store,
                 const std::string& feature_name) {
  namespace fs = std::filesystem;
  feature_value(StaticFeatures{}, feature_name);  // reject unknown features up front
  for (const auto& method : config.methods) {
    for (const auto& suite : config.suites) {
      for (int r = 0; r < config.runs_per_cell; ++r) {
        const fs::path path = store.cell_dir(method.name, suite.id(), r) / "lineage.jsonl";
        if (!fs::exists(path)) continue;
        RunLineage lineage = read_lineage_file(path);
        lineage.method_name = method.name;
        const CodeGraph graph = build_ceg(lineage, feature_name);
        const std::string base = "ceg_" + sanitize_component(method.name) + "__" +
                                 sanitize_component(suite.id()) + "__run" + std::to_string(r);
        write_text_file(store.analysis_dir() / (base + ".dot"), ceg_to_dot(graph));
        write_text_file(store.analysis_dir() / (base + "_nodes.csv"), ceg_nodes_csv(graph));
        write_text_file(store.analysis_dir() / (base + "_edges.csv"), ceg_edges_csv(graph));
      }
    }
  }
}

ReportTable analyze_report(const ResultsStore& store) {
  const auto rows = read_aocc_csv(store.analysis_dir() / "aocc.csv");
  const ReportTable report = render_report(report_samples_from_rows(rows));
  write_text_file(store.analysis_dir() / "report.txt", report_to_text(report));
  write_text_file(store.analysis_dir() / "report.csv", report_to_csv(report));
  return report;
}

std::vector<RatingTable> rate_elo(const ExperimentConfig& config, ResultsStore& store,
                                  std::optional<long> n_matches,
                                  std::optional<std::uint64_t> seed) {
  const auto rows = read_aocc_csv(store.analysis_dir() / "aocc.csv");
  EloParams params = config.elo;
  if (n_matches) params.n_matches = *n_matches;
  if (seed) params.tournament_seed = *seed;

  std::vector<RatingTable> tables;
  std::ostringstream out;
  out << "suite,algorithm,rating,matches,wins,draws,losses\n";
  for (const auto& [suite, outcomes] : outcome_tables_from_rows(rows)) {
    if (outcomes.algorithms.size() < 2) continue;
    RatingTable table = elo_tournament(outcomes, params);
    for (const auto& e : table.ranked()) {
      out << suite << ',' << e.algorithm << ',' << fmt_double(e.rating) << ',' << e.matches << ','
          << e.wins << ',' << e.draws << ',' << e.losses << '\n';
    }
    tables.push_back(std::move(table));
  }
  write_text_file(store.analysis_dir() / "elo.csv", out.str());
  return tables;
}

}  // namespace blade
