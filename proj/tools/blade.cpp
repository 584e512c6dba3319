// blade: benchmarking harness for LLM-driven discovery of continuous
// black-box optimizers.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "blade/experiment.hpp"
#include "blade/version.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitBadConfig = 2;
constexpr int kExitMissingResults = 3;

std::atomic<bool> g_interrupted{false};

void handle_interrupt(int) { g_interrupted.store(true); }

std::string slurp_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw blade::ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Accepts either an experiment config or a manifest.json (relaunch path).
std::string load_config_text(const std::filesystem::path& path) {
  std::string text = slurp_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const auto manifest = nlohmann::json::parse(text, nullptr, false);
    if (manifest.is_discarded() || !manifest.contains("config_text"))
      throw blade::ConfigError(path.string() + " looks like JSON but is not a blade manifest");
    return manifest["config_text"].get<std::string>();
  }
  return text;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

blade::ExperimentConfig configure(const std::string& text, const Overrides& overrides) {
  auto config = blade::parse_experiment_config(text);
  if (overrides.seed) {
    config.master_seed = *overrides.seed;
    for (auto& suite : config.suites) suite.master_seed = *overrides.seed;
    if (config.elo.tournament_seed == 0) config.elo.tournament_seed = *overrides.seed;
  }
  if (overrides.workers) config.worker_count = *overrides.workers;
  if (overrides.out) config.output_dir = *overrides.out;
  return config;
}

int cmd_run(const std::string& config_path, const Overrides& overrides) {
  const std::string text = load_config_text(config_path);
  auto config = configure(text, overrides);

  std::signal(SIGINT, handle_interrupt);
  auto store = blade::ResultsStore::create(config.output_dir, config, text);
  std::cout << "blade " << blade::kBladeVersion << ": running '" << config.name << "' ("
            << config.methods.size() << " methods x " << config.suites.size() << " suites x "
            << config.runs_per_cell << " runs) -> " << config.output_dir.string() << "\n";

  const auto summary = blade::run_experiment(config, store, &g_interrupted);
  for (const auto& cell : summary.failures()) {
    std::cerr << "cell " << cell.method << "/" << cell.suite << "/run_" << cell.run_index << ": "
              << cell.status << (cell.error.empty() ? "" : " (" + cell.error + ")") << "\n";
  }
  const auto failures = summary.failures();
  std::cout << (summary.cells.size() - failures.size()) << "/" << summary.cells.size()
            << " cells completed\n";
  if (g_interrupted.load()) {
    std::cerr << "interrupted: remaining cells were aborted\n";
    return kExitFailure;
  }
  return summary.all_ok() ? kExitOk : kExitFailure;
}

int cmd_validate(const std::string& results_dir, std::optional<int> runs) {
  auto store = blade::ResultsStore::open(results_dir);
  auto config = blade::parse_experiment_config(store.config_text());
  if (runs) config.validation_runs = *runs;
  const auto rows = blade::validate_results(config, store);
  for (const auto& row : rows) {
    std::cout << row.suite << " / " << row.method << ": ";
    if (row.viable) {
      std::cout << "best '" << row.best_name
                << "' (training fitness " << blade::fmt_double(row.best_training_fitness) << ")\n";
    } else {
      std::cout << "non-viable (no evaluated candidate)\n";
    }
  }
  std::cout << "analysis written to " << store.analysis_dir().string() << "\n";
  return kExitOk;
}

int cmd_analyze_ceg(const std::string& results_dir, const std::string& feature) {
  auto store = blade::ResultsStore::open(results_dir);
  const auto config = blade::parse_experiment_config(store.config_text());
  blade::analyze_ceg(config, store, feature);
  std::cout << "code evolution graphs written to " << store.analysis_dir().string() << "\n";
  return kExitOk;
}

int cmd_analyze_report(const std::string& results_dir) {
  auto store = blade::ResultsStore::open(results_dir);
  const auto report = blade::analyze_report(store);
  std::cout << blade::report_to_text(report);
  return kExitOk;
}

int cmd_rate_elo(const std::string& results_dir, std::optional<long> matches,
                 std::optional<std::uint64_t> seed) {
  auto store = blade::ResultsStore::open(results_dir);
  const auto config = blade::parse_experiment_config(store.config_text());
  const auto tables = blade::rate_elo(config, store, matches, seed);
  for (const auto& table : tables) {
    for (const auto& entry : table.ranked()) {
      std::cout << entry.algorithm << ": " << blade::fmt_double(entry.rating) << " ("
                << entry.wins << "W/" << entry.draws << "D/" << entry.losses << "L)\n";
    }
  }
  return kExitOk;
}

int cmd_instances_generate(const std::string& config_path, const std::string& out,
                           std::optional<std::uint64_t> seed) {
  Overrides overrides;
  overrides.seed = seed;
  const auto config = configure(load_config_text(config_path), overrides);
  std::vector<blade::ProblemInstance> all;
  for (const auto& suite : config.suites) {
    const auto split = blade::suite_split(suite);
    for (const auto* bucket : {&split.train, &split.test, &split.validation})
      all.insert(all.end(), bucket->begin(), bucket->end());
  }
  if (out == "-") {
    blade::write_instances(std::cout, all);
  } else {
    std::ofstream file(out);
    if (!file) throw blade::ConfigError("cannot write " + out);
    blade::write_instances(file, all);
    std::cout << all.size() << " instances written to " << out << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"benchmarking harness for LLM-driven automated algorithm discovery"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(blade::kBladeVersion));

  Overrides overrides;
  std::string config_path, results_dir;
  std::string feature = "token_count";
  std::string out_file = "instances.jsonl";
  std::optional<int> validate_runs;
  std::optional<long> elo_matches;
  std::optional<std::uint64_t> elo_seed, seed_flag;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_flag, "override the master seed");
  };

  auto* run = app.add_subcommand("run", "execute an experiment from a config or manifest");
  run->add_option("config", config_path, "experiment config (.toml) or manifest.json")
      ->required();
  add_seed(run);
  run->add_option("--workers", overrides.workers, "worker pool size override");
  run->add_option("--out", overrides.out, "output directory override");

  auto* validate = app.add_subcommand("validate", "evaluate best candidates against baselines");
  validate->add_option("results", results_dir, "results directory")->required();
  validate->add_option("--runs", validate_runs, "validation runs per instance");

  auto* analyze = app.add_subcommand("analyze", "post-hoc analysis of a results store");
  analyze->require_subcommand(1);
  auto* ceg = analyze->add_subcommand("ceg", "export code evolution graphs");
  ceg->add_option("results", results_dir, "results directory")->required();
  ceg->add_option("--feature", feature, "static feature for the y-axis");
  auto* report = analyze->add_subcommand("report", "render the significance report");
  report->add_option("results", results_dir, "results directory")->required();

  auto* rate = app.add_subcommand("rate", "comparative ratings");
  rate->require_subcommand(1);
  auto* elo = rate->add_subcommand("elo", "rerun the rating tournament");
  elo->add_option("results", results_dir, "results directory")->required();
  elo->add_option("--matches", elo_matches, "number of one-against-one comparisons");
  elo->add_option("--seed", elo_seed, "tournament seed");

  auto* instances = app.add_subcommand("instances", "problem instance tools");
  instances->require_subcommand(1);
  auto* generate = instances->add_subcommand("generate", "write suite instances as records");
  generate->add_option("config", config_path, "experiment config with [[suite]] entries")
      ->required();
  generate->add_option("--out", out_file, "output file ('-' for stdout)");
  add_seed(generate);

  CLI11_PARSE(app, argc, argv);
  overrides.seed = seed_flag;

  try {
    if (run->parsed()) return cmd_run(config_path, overrides);
    if (validate->parsed()) return cmd_validate(results_dir, validate_runs);
    if (ceg->parsed()) return cmd_analyze_ceg(results_dir, feature);
    if (report->parsed()) return cmd_analyze_report(results_dir);
    if (elo->parsed()) return cmd_rate_elo(results_dir, elo_matches, elo_seed);
    if (generate->parsed()) return cmd_instances_generate(config_path, out_file, seed_flag);
    std::cerr << "no subcommand\n";
    return kExitFailure;
  } catch (const blade::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const blade::StoreError& e) {
    std::cerr << "results error: " << e.what() << "\n";
    return kExitMissingResults;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
