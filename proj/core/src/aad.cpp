#include "blade/aad.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "blade/rng.hpp"

namespace blade {
namespace {

using json = nlohmann::json;

constexpr std::uint64_t kTagAadLoop = 0xAAD;

int generation_of(int id, int mu, int lambda) {
  if (id <= mu) return 0;
  return (id - mu + lambda - 1) / lambda;
}

bool is_parent_eligible(const Candidate& c) {
  return c.status == CandidateStatus::Evaluated;
}

// fitness desc, then earlier generation, then lower id
bool survivor_order(const Candidate& a, const Candidate& b) {
  const double fa = a.fitness.value_or(kFailurePenaltyFitness);
  const double fb = b.fitness.value_or(kFailurePenaltyFitness);
  if (fa != fb) return fa > fb;
  if (a.generation_index != b.generation_index) return a.generation_index < b.generation_index;
  return a.id < b.id;
}

struct RunDriver {
  const AadConfig& config;
  AadContext& ctx;
  std::uint64_t run_seed;
  const FunctionRegistry& registry;
  RunLineage lineage;
  Rng rng;

  RunDriver(const AadConfig& config, AadContext& ctx, std::uint64_t run_seed)
      : config(config),
        ctx(ctx),
        run_seed(run_seed),
        registry(ctx.registry ? *ctx.registry : FunctionRegistry::shared()),
        rng(seed_mix({run_seed, kTagAadLoop})) {
    lineage.method_name = config.name;
    lineage.run_seed = run_seed;
  }

  int next_prompt_id() {
    if (config.prompt_selection == PromptSelection::Single)
      return config.mutation_prompt_ids.front();
    return config.mutation_prompt_ids[rng.below(config.mutation_prompt_ids.size())];
  }

  Candidate generate_one(int id, const Candidate* parent, std::optional<int> prompt_id) {
    Candidate cand;
    cand.id = id;
    cand.generation_index =
        config.method == AadMethod::RandomSampling ? 0 : generation_of(id, config.mu, config.lambda);
    cand.prompt_id = prompt_id;
    if (parent) cand.parent_ids = {parent->id};

    const int dimension = ctx.train_instances.front().dimension;
    std::string prompt =
        parent ? build_mutation_prompt(*parent, *prompt_id, *ctx.prompts)
               : build_task_prompt(registry, ctx.train_instances, ctx.eval_budget.max_evaluations,
                                   dimension, config.include_descriptions);

    LlmRequest request;
    request.model = ctx.model;
    request.temperature = ctx.temperature;
    request.messages = {{"user", std::move(prompt)}};
    request.seed = seed_mix({run_seed, static_cast<std::uint64_t>(id)});

    std::string response_text;
    try {
      const LlmResponse response = generate(*ctx.llm, request, ctx.llm_log, ctx.retry);
      response_text = response.text;
      const ParsedCandidate parsed = parse_response(response_text);
      cand.name = parsed.name;
      cand.description = parsed.description;
      if (auto solver = SolverConfig::parse(parsed.payload)) {
        solver->validate();
        cand.payload = std::move(*solver);
      } else if (ctx.external_launch) {
        cand.payload = ExternalSpec{parsed.payload, *ctx.external_launch};
      } else {
        throw ConfigError(
            "payload is not a solver configuration and no launch recipe is configured");
      }
    } catch (const BladeError& e) {
      cand.name = "failed-" + std::to_string(id);
      cand.description = std::string("generation failed: ") + e.what();
      cand.payload = ExternalSpec{response_text, {}};
      cand.status = CandidateStatus::Failed;
      cand.fitness = kFailurePenaltyFitness;
      return cand;
    }

    const double fitness =
        training_fitness(registry, cand, ctx.train_instances, ctx.train_seeds, ctx.eval_budget,
                         ctx.aocc_params, ctx.run_options, ctx.eval_logs);
    cand.fitness = fitness;
    // A mean equal to the penalty is only possible when every run failed.
    cand.status =
        fitness == kFailurePenaltyFitness ? CandidateStatus::Failed : CandidateStatus::Evaluated;
    return cand;
  }
};

}  // namespace

std::string_view to_token(AadMethod m) {
  return m == AadMethod::LlameaES ? "llamea" : "random_sampling";
}

AadMethod aad_method_from_token(std::string_view token) {
  for (auto m : {AadMethod::LlameaES, AadMethod::RandomSampling})
    if (to_token(m) == token) return m;
  throw ConfigError("unknown search method: '" + std::string(token) + "'");
}

std::string_view to_token(PromptSelection s) {
  return s == PromptSelection::Single ? "single" : "uniform_random";
}

PromptSelection prompt_selection_from_token(std::string_view token) {
  for (auto s : {PromptSelection::Single, PromptSelection::UniformRandom})
    if (to_token(s) == token) return s;
  throw ConfigError("unknown prompt selection: '" + std::string(token) + "'");
}

void AadConfig::validate(const PromptSet& prompts) const {
  if (candidate_budget < 1) throw ConfigError("candidate_budget must be >= 1");
  if (method == AadMethod::RandomSampling) return;
  if (mu < 1 || lambda < 1) throw ConfigError("mu and lambda must be >= 1");
  if (!elitist && lambda < mu)
    throw ConfigError("comma selection needs lambda >= mu");
  if (candidate_budget < mu + lambda)
    throw ConfigError("candidate_budget must be >= mu + lambda");
  if (mutation_prompt_ids.empty()) throw ConfigError("no mutation prompts configured");
  for (int id : mutation_prompt_ids) prompts.get(id);
}

std::vector<double> RunLineage::fitness_sequence() const {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.fitness.value_or(kFailurePenaltyFitness));
  return out;
}

RunLineage run_llamea(const AadConfig& config, AadContext& ctx, std::uint64_t run_seed) {
  if (!ctx.llm || !ctx.prompts) throw ConfigError("aad context is missing its llm or prompts");
  if (ctx.train_instances.empty()) throw InputError("aad: empty training instance list");
  config.validate(*ctx.prompts);

  RunDriver driver(config, ctx, run_seed);
  auto& lineage = driver.lineage;
  std::vector<int> parents;  // indices into lineage.candidates

  int next_id = 1;
  for (int i = 0; i < config.mu && next_id <= config.candidate_budget; ++i, ++next_id) {
    lineage.candidates.push_back(driver.generate_one(next_id, nullptr, std::nullopt));
  }
  for (std::size_t i = 0; i < lineage.candidates.size(); ++i)
    if (is_parent_eligible(lineage.candidates[i])) parents.push_back(static_cast<int>(i));

  while (next_id <= config.candidate_budget) {
    std::vector<int> batch;
    for (int k = 0; k < config.lambda && next_id <= config.candidate_budget; ++k, ++next_id) {
      Candidate offspring;
      if (parents.empty()) {
        // The whole parent set failed; fall back to fresh task-prompt draws.
        offspring = driver.generate_one(next_id, nullptr, std::nullopt);
      } else {
        const int parent_index = parents[driver.rng.below(parents.size())];
        const int prompt_id = driver.next_prompt_id();
        offspring =
            driver.generate_one(next_id, &lineage.candidates[parent_index], prompt_id);
      }
      batch.push_back(static_cast<int>(lineage.candidates.size()));
      lineage.candidates.push_back(std::move(offspring));
    }

    // Survivor selection over the batch (comma) or parents + batch (plus).
    std::vector<int> pool;
    if (config.elitist) pool = parents;
    for (int idx : batch)
      if (is_parent_eligible(lineage.candidates[idx])) pool.push_back(idx);
    std::sort(pool.begin(), pool.end(), [&](int a, int b) {
      return survivor_order(lineage.candidates[a], lineage.candidates[b]);
    });
    if (static_cast<int>(pool.size()) > config.mu) pool.resize(config.mu);
    if (!pool.empty()) parents = pool;
    // An all-failed batch under comma selection keeps the previous parents.
  }
  return lineage;
}

RunLineage run_random_sampling(const AadConfig& config, AadContext& ctx, std::uint64_t run_seed) {
  if (!ctx.llm || !ctx.prompts) throw ConfigError("aad context is missing its llm or prompts");
  if (ctx.train_instances.empty()) throw InputError("aad: empty training instance list");
  config.validate(*ctx.prompts);

  RunDriver driver(config, ctx, run_seed);
  for (int id = 1; id <= config.candidate_budget; ++id)
    driver.lineage.candidates.push_back(driver.generate_one(id, nullptr, std::nullopt));
  return driver.lineage;
}

RunLineage run_aad(const AadConfig& config, AadContext& ctx, std::uint64_t run_seed) {
  return config.method == AadMethod::RandomSampling ? run_random_sampling(config, ctx, run_seed)
                                                    : run_llamea(config, ctx, run_seed);
}

const Candidate& select_best(const RunLineage& lineage) {
  const Candidate* best = nullptr;
  for (const auto& c : lineage.candidates) {
    if (c.status != CandidateStatus::Evaluated) continue;
    if (!best || c.fitness.value() > best->fitness.value()) best = &c;
  }
  if (!best) throw NoViableCandidateError("no evaluated candidate in lineage");
  return *best;
}

std::string candidate_to_json(const Candidate& candidate) {
  json j;
  j["id"] = candidate.id;
  j["parents"] = candidate.parent_ids;
  j["generation"] = candidate.generation_index;
  if (candidate.prompt_id) j["prompt_id"] = *candidate.prompt_id;
  else j["prompt_id"] = nullptr;
  j["name"] = candidate.name;
  j["description"] = candidate.description;
  if (candidate.is_builtin()) {
    j["kind"] = "builtin";
    j["payload"] = candidate.config().canonical();
  } else {
    j["kind"] = "external";
    j["payload"] = candidate.external().source;
    j["launch"] = candidate.external().launch.argv;
  }
  if (candidate.fitness) j["fitness"] = *candidate.fitness;
  else j["fitness"] = nullptr;
  j["status"] = std::string(to_token(candidate.status));
  return j.dump();
}

Candidate candidate_from_json(const std::string& line) {
  const json j = json::parse(line);
  Candidate c;
  c.id = j.at("id").get<int>();
  c.parent_ids = j.at("parents").get<std::vector<int>>();
  c.generation_index = j.at("generation").get<int>();
  if (!j.at("prompt_id").is_null()) c.prompt_id = j.at("prompt_id").get<int>();
  c.name = j.at("name").get<std::string>();
  c.description = j.at("description").get<std::string>();
  const std::string payload = j.at("payload").get<std::string>();
  if (j.at("kind").get<std::string>() == "builtin") {
    auto config = SolverConfig::parse(payload);
    if (!config) throw InputError("lineage record has an unparseable builtin payload");
    c.payload = std::move(*config);
  } else {
    ExternalSpec spec;
    spec.source = payload;
    if (j.contains("launch")) spec.launch.argv = j["launch"].get<std::vector<std::string>>();
    c.payload = std::move(spec);
  }
  if (!j.at("fitness").is_null()) c.fitness = j.at("fitness").get<double>();
  c.status = candidate_status_from_token(j.at("status").get<std::string>());
  return c;
}

void write_lineage(std::ostream& out, const RunLineage& lineage) {
  for (const auto& c : lineage.candidates) out << candidate_to_json(c) << '\n';
}

void write_lineage_file(const std::filesystem::path& path, const RunLineage& lineage) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write lineage file " + path.string());
  write_lineage(out, lineage);
}

RunLineage read_lineage(std::istream& in) {
  RunLineage lineage;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    lineage.candidates.push_back(candidate_from_json(line));
  }
  return lineage;
}

RunLineage read_lineage_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read lineage file " + path.string());
  auto lineage = read_lineage(in);
  return lineage;
}

}  // namespace blade
