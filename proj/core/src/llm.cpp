#include "blade/llm.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "blade/rng.hpp"

namespace blade {
namespace {

using json = nlohmann::json;

long word_count(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  long n = 0;
  while (in >> word) ++n;
  return n;
}

double steady_now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

long long wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

constexpr std::string_view kResponseContract =
    "Respond exactly in this format:\n"
    "# Name: <short identifier>\n"
    "# Description: <one sentence>\n"
    "```\n"
    "<the algorithm: either one solver configuration line such as\n"
    "DifferentialEvolution(CR=0.9,F=0.5,NP=30), RandomSearch(),\n"
    "OnePlusOneES(alpha=1.3,sigma0=1.0) or CmaEs(lambda=12,sigma0=2.0),\n"
    "or a complete program speaking the ask-tell protocol>\n"
    "```\n";

}  // namespace

std::string LlmRequest::joined_text() const {
  std::string out;
  for (const auto& m : messages) {
    out += m.role;
    out += ": ";
    out += m.content;
    out += '\n';
  }
  return out;
}

std::uint64_t LlmRequest::hash() const {
  return seed_mix({hash_text(joined_text()), seed.value_or(0)});
}

QueryLogger::QueryLogger(const std::filesystem::path& path)
    : file_(std::make_unique<std::ofstream>(path, std::ios::app)) {
  if (!*file_) throw InputError("cannot open query log " + path.string());
}

void QueryLogger::record(const LlmRequest& request, const std::string& model, int attempt,
                         const LlmResponse* response, const std::string& error) {
  std::lock_guard lock(mu_);
  ++entries_;
  if (response) {
    prompt_tokens_ += response->usage.prompt_tokens;
    completion_tokens_ += response->usage.completion_tokens;
    cost_ += response->cost;
  }
  if (!file_) return;

  json entry;
  entry["ts_ms"] = wall_clock_ms();
  entry["model"] = model;
  entry["request_hash"] = hex64(request.hash());
  entry["temperature"] = request.temperature;
  if (request.seed) entry["seed"] = *request.seed;
  json msgs = json::array();
  for (const auto& m : request.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  entry["messages"] = std::move(msgs);
  entry["attempt"] = attempt;
  if (response) {
    entry["outcome"] = "ok";
    entry["response"] = response->text;
    entry["prompt_tokens"] = response->usage.prompt_tokens;
    entry["completion_tokens"] = response->usage.completion_tokens;
    entry["cost"] = response->cost;
    entry["latency_s"] = response->latency_seconds;
  } else {
    entry["outcome"] = "error";
    entry["error"] = error;
  }
  *file_ << entry.dump() << '\n';
  file_->flush();
}

long QueryLogger::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}
long QueryLogger::total_prompt_tokens() const {
  std::lock_guard lock(mu_);
  return prompt_tokens_;
}
long QueryLogger::total_completion_tokens() const {
  std::lock_guard lock(mu_);
  return completion_tokens_;
}
double QueryLogger::total_cost() const {
  std::lock_guard lock(mu_);
  return cost_;
}

LlmResponse generate(LlmClient& client, const LlmRequest& request, QueryLogger* log,
                     const RetryPolicy& policy) {
  double backoff = policy.initial_backoff_seconds;
  for (int attempt = 1;; ++attempt) {
    try {
      LlmResponse response = client.complete(request);
      if (log) log->record(request, client.describe(), attempt, &response, "");
      return response;
    } catch (const LlmError& e) {
      if (log) log->record(request, client.describe(), attempt, nullptr, e.what());
      if (!e.retryable() || attempt >= policy.max_attempts) throw;
      if (backoff > 0.0)
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= policy.backoff_multiplier;
    }
  }
}

PromptSet PromptSet::defaults() {
  PromptSet set;
  set.set(1, "Refine the strategy of the selected algorithm to improve it");
  set.set(2, "Generate a new algorithm that is different from the algorithms you have tried "
             "before");
  set.set(3, "Refine and simplify the selected algorithm to improve it");
  return set;
}

void PromptSet::set(int id, std::string text) { prompts_[id] = std::move(text); }

const std::string& PromptSet::get(int id) const {
  const auto it = prompts_.find(id);
  if (it == prompts_.end())
    throw ConfigError("unknown mutation prompt id " + std::to_string(id));
  return it->second;
}

std::vector<int> PromptSet::ids() const {
  std::vector<int> out;
  for (const auto& [id, text] : prompts_) out.push_back(id);
  return out;
}

std::string build_task_prompt(const FunctionRegistry& registry,
                              const std::vector<ProblemInstance>& instances, int budget,
                              int dimension, bool include_description) {
  if (instances.empty()) throw InputError("build_task_prompt: empty instance list");
  const auto& bounds = instances.front().bounds;

  std::ostringstream os;
  os << "You are designing a novel iterative optimization heuristic for continuous "
        "black-box problems.\n\n";
  os << "Task: minimize a black-box objective f: R^" << dimension
     << " -> R over the box " << fmt_double(bounds.lower(0)) << " <= x_i <= "
     << fmt_double(bounds.upper(0)) << ".\n";
  os << "Evaluation budget: " << budget << " function evaluations per run.\n";
  os << "The optimizer runs in an ask-tell loop: it proposes one point, receives its "
        "objective value, and continues until the harness stops it.\n";

  if (include_description) {
    std::set<int> seen;
    std::set<FunctionGroup> groups;
    os << "\nThe training problems are drawn from the following landscapes:\n";
    for (const auto& inst : instances) {
      for (int fid : inst.fids) {
        if (!seen.insert(fid).second) continue;
        const auto& fn = registry.by_fid(fid);
        groups.insert(fn.group);
        os << "- " << fn.name << ": " << fn.description << "\n";
      }
    }
    for (const auto g : groups) os << "Problem group: " << group_display_name(g) << "\n";
    if (instances.front().kind == SuiteKind::Mabbob)
      os << "Each instance is an affine combination of these landscapes with a freshly "
            "placed optimum.\n";
  }

  os << '\n' << kResponseContract;
  return os.str();
}

std::string build_task_prompt(const std::vector<ProblemInstance>& instances, int budget,
                              int dimension, bool include_description) {
  return build_task_prompt(FunctionRegistry::shared(), instances, budget, dimension,
                           include_description);
}

std::string build_mutation_prompt(const Candidate& parent, int prompt_id,
                                  const PromptSet& prompts) {
  const std::string& instruction = prompts.get(prompt_id);
  char fitness[32];
  std::snprintf(fitness, sizeof(fitness), "%.4f", parent.fitness.value_or(-1.0));

  std::ostringstream os;
  os << "The selected algorithm from the current population is:\n";
  os << "# Name: " << parent.name << "\n";
  if (!parent.description.empty()) os << "# Description: " << parent.description << "\n";
  os << "# Fitness: " << fitness << "\n";
  os << "```\n" << parent.payload_text() << "\n```\n\n";
  os << instruction << "\n\n";
  os << kResponseContract;
  return os.str();
}

ParsedCandidate parse_response(const std::string& text) {
  ParsedCandidate out;
  std::istringstream in(text);
  std::string line;
  bool in_block = false;
  bool have_block = false;
  std::string block;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.rfind("```", 0) == 0) {
      if (in_block) {
        have_block = true;
        break;
      }
      in_block = true;
      continue;
    }
    if (in_block) {
      if (!block.empty()) block += '\n';
      block += line;
      continue;
    }
    if (t.rfind("# Name:", 0) == 0 && out.name.empty())
      out.name = std::string(trim(t.substr(7)));
    else if (t.rfind("# Description:", 0) == 0 && out.description.empty())
      out.description = std::string(trim(t.substr(14)));
  }
  if (!have_block && in_block && !block.empty()) have_block = true;  // unterminated fence
  if (!have_block || trim(block).empty())
    throw ParseError("response contains no fenced code block");
  out.payload = std::string(trim(block));

  if (out.name.empty()) {
    // fall back to the first identifier-like token of the block
    std::string token;
    for (char c : out.payload) {
      const bool id_char = std::isalnum(static_cast<unsigned char>(c)) || c == '_';
      if (id_char) {
        token += c;
      } else if (!token.empty()) {
        break;
      }
    }
    while (!token.empty() && std::isdigit(static_cast<unsigned char>(token.front())))
      token.erase(token.begin());
    out.name = token.empty() ? "unnamed" : token;
  }
  return out;
}

// --- mock client ---

namespace {

constexpr SolverFamily kFamilies[] = {SolverFamily::RandomSearch, SolverFamily::OnePlusOneES,
                                      SolverFamily::DifferentialEvolution, SolverFamily::CmaEs};

SolverConfig random_config(SolverFamily family, Rng& rng) {
  SolverConfig config;
  config.family = family;
  switch (family) {
    case SolverFamily::RandomSearch:
      break;
    case SolverFamily::OnePlusOneES:
      config.params["sigma0"] = std::exp(rng.uniform(std::log(0.2), std::log(3.0)));
      config.params["alpha"] = rng.uniform(1.1, 2.0);
      break;
    case SolverFamily::DifferentialEvolution:
      config.params["NP"] = static_cast<double>(8 + rng.below(53));
      config.params["F"] = rng.uniform(0.3, 1.2);
      config.params["CR"] = rng.uniform(0.1, 1.0);
      break;
    case SolverFamily::CmaEs:
      config.params["lambda"] = static_cast<double>(6 + rng.below(35));
      config.params["sigma0"] = rng.uniform(0.5, 3.0);
      break;
  }
  return config;
}

SolverConfig perturb_config(const SolverConfig& parent, Rng& rng) {
  SolverConfig out = parent;
  const auto& ranges = solver_param_ranges(parent.family);
  for (auto& [key, value] : out.params) {
    const auto it = ranges.find(key);
    if (it == ranges.end()) continue;
    if (it->second.integral) {
      value = it->second.clamp(value + static_cast<double>(rng.below(3)) - 1.0);
    } else {
      value = it->second.clamp(value * std::exp(0.2 * rng.normal()));
    }
  }
  return out;
}

SolverConfig simplify_config(const SolverConfig& parent, Rng& rng) {
  SolverConfig out = parent;
  if (out.params.empty()) return out;  // nothing left to strip

  const bool has_population = out.params.count("NP") || out.params.count("lambda");
  if (has_population && rng.below(2) == 0) {
    const std::string key = out.params.count("NP") ? "NP" : "lambda";
    const auto& range = solver_param_ranges(parent.family).at(key);
    out.params[key] = range.clamp(std::floor(out.params[key] * 0.8));
  } else {
    auto it = out.params.begin();
    std::advance(it, static_cast<long>(rng.below(out.params.size())));
    out.params.erase(it);
  }
  return out;
}

SolverConfig different_config(const SolverConfig& parent, Rng& rng) {
  std::vector<SolverFamily> others;
  for (auto f : kFamilies)
    if (f != parent.family) others.push_back(f);
  return random_config(others[rng.below(others.size())], rng);
}

std::string family_label(SolverFamily family) {
  switch (family) {
    case SolverFamily::RandomSearch: return "RS";
    case SolverFamily::OnePlusOneES: return "ES";
    case SolverFamily::DifferentialEvolution: return "DE";
    case SolverFamily::CmaEs: return "CMA";
  }
  return "X";
}

}  // namespace

LlmResponse MockLlmClient::complete(const LlmRequest& request) {
  const std::string prompt = request.joined_text();
  Rng rng(seed_mix({seed_, request.seed.value_or(0), hash_text(prompt)}));

  // A parseable config inside the prompt marks a mutation request.
  std::optional<SolverConfig> parent;
  try {
    const auto parsed = parse_response(prompt);
    parent = SolverConfig::parse(parsed.payload);
  } catch (const ParseError&) {
    parent = std::nullopt;
  }

  SolverConfig config;
  std::string verb;
  if (!parent) {
    config = random_config(kFamilies[rng.below(4)], rng);
    verb = prompt.find("# Fitness:") != std::string::npos ? "resampled" : "initial";
  } else if (prompt.find("simplify") != std::string::npos) {
    config = simplify_config(*parent, rng);
    verb = "simplified";
  } else if (prompt.find("different") != std::string::npos) {
    config = different_config(*parent, rng);
    verb = "redesigned";
  } else {
    config = perturb_config(*parent, rng);
    verb = "refined";
  }

  std::ostringstream text;
  text << "# Name: " << family_label(config.family) << "-" << hex64(rng.u64()).substr(12) << "\n";
  text << "# Description: " << verb << " " << to_token(config.family)
       << " configuration\n";
  text << "```\n" << config.canonical() << "\n```\n";

  LlmResponse response;
  response.text = text.str();
  response.usage.prompt_tokens = word_count(prompt);
  response.usage.completion_tokens = word_count(response.text);
  return response;
}

std::string MockLlmClient::describe() const {
  return "mock(seed=" + std::to_string(seed_) + ")";
}

// --- http client ---

TokenBucket::TokenBucket(double capacity, double refill_per_second, std::function<double()> clock)
    : clock_(clock ? std::move(clock) : steady_now),
      capacity_(capacity),
      rate_(refill_per_second),
      tokens_(capacity),
      last_(clock_()) {}

double TokenBucket::acquire() {
  if (rate_ <= 0.0) return 0.0;  // unlimited
  double waited = 0.0;
  for (;;) {
    double sleep_for = 0.0;
    {
      std::lock_guard lock(mu_);
      const double now = clock_();
      tokens_ = std::min(capacity_, tokens_ + (now - last_) * rate_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return waited;
      }
      sleep_for = (1.0 - tokens_) / rate_;
    }
    waited += sleep_for;
    std::this_thread::sleep_for(std::chrono::duration<double>(sleep_for));
  }
}

HttpLlmClient::HttpLlmClient(HttpLlmConfig config)
    : config_(std::move(config)),
      limiter_(std::max(1.0, config_.requests_per_minute / 60.0), config_.requests_per_minute / 60.0) {
  if (config_.base_url.empty()) throw ConfigError("http llm client needs a base_url");
}

LlmResponse HttpLlmClient::complete(const LlmRequest& request) {
  limiter_.acquire();

  json body;
  body["model"] = request.model;
  json msgs = json::array();
  for (const auto& m : request.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(msgs);
  body["temperature"] = request.temperature;
  if (request.seed) body["seed"] = *request.seed;

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(std::chrono::duration<double>(config_.request_timeout_seconds));
  client.set_read_timeout(std::chrono::duration<double>(config_.request_timeout_seconds));
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  const double start = steady_now();
  auto result = client.Post(config_.path, headers, body.dump(), "application/json");
  const double latency = steady_now() - start;

  if (!result)
    throw LlmError("transport failure: " + httplib::to_string(result.error()), true);
  if (result->status < 200 || result->status >= 300) {
    const bool retryable = result->status >= 500 || result->status == 429;
    throw LlmError("endpoint returned HTTP " + std::to_string(result->status), retryable);
  }

  json payload = json::parse(result->body, nullptr, false);
  if (payload.is_discarded() || !payload.contains("choices") || payload["choices"].empty())
    throw LlmError("endpoint returned an unparseable completion payload", false);

  LlmResponse response;
  response.text = payload["choices"][0].value("message", json::object()).value("content", "");
  if (payload.contains("usage")) {
    response.usage.prompt_tokens = payload["usage"].value("prompt_tokens", 0);
    response.usage.completion_tokens = payload["usage"].value("completion_tokens", 0);
  }
  response.latency_seconds = latency;
  response.cost = response.usage.prompt_tokens / 1000.0 * config_.prices.input_per_1k +
                  response.usage.completion_tokens / 1000.0 * config_.prices.output_per_1k;
  return response;
}

std::string HttpLlmClient::describe() const { return config_.base_url + config_.path; }

std::unique_ptr<LlmClient> make_client(const LlmSpec& spec) {
  if (spec.kind == LlmSpec::Kind::Mock) return std::make_unique<MockLlmClient>(spec.mock_seed);
  HttpLlmConfig http = spec.http;
  if (const char* base = std::getenv("BLADE_LLM_BASE_URL"); base && *base)
    http.base_url = base;  // endpoint override without touching the config
  return std::make_unique<HttpLlmClient>(http);
}

}  // namespace blade
