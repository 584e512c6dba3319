#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "blade/candidates.hpp"
#include "blade/problems.hpp"
#include "blade/util.hpp"

namespace blade {

class ParseError : public BladeError {
 public:
  using BladeError::BladeError;
};

/// Query failure after a single attempt. Retryable errors cover transient
/// transport problems (connection loss, 5xx, rate limiting).
class LlmError : public BladeError {
 public:
  LlmError(const std::string& what, bool retryable) : BladeError(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

struct LlmMessage {
  std::string role;
  std::string content;
};

struct LlmRequest {
  std::string model;
  std::vector<LlmMessage> messages;
  double temperature = 0.7;
  std::optional<std::uint64_t> seed;  // forwarded when the endpoint supports it

  std::string joined_text() const;
  std::uint64_t hash() const;
};

struct LlmUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct LlmResponse {
  std::string text;
  LlmUsage usage;
  double latency_seconds = 0.0;
  double cost = 0.0;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  /// One attempt; retry policy lives in generate().
  virtual LlmResponse complete(const LlmRequest& request) = 0;
  virtual std::string describe() const = 0;
};

/// Thread-safe query log. Every attempt is recorded before its response is
/// used: timestamp, model, request hash, full prompt and response text,
/// token counts, cost, outcome.
class QueryLogger {
 public:
  QueryLogger() = default;  // in-memory counters only
  explicit QueryLogger(const std::filesystem::path& path);

  void record(const LlmRequest& request, const std::string& model, int attempt,
              const LlmResponse* response, const std::string& error);

  long entries() const;
  long total_prompt_tokens() const;
  long total_completion_tokens() const;
  double total_cost() const;

 private:
  mutable std::mutex mu_;
  std::unique_ptr<std::ofstream> file_;
  long entries_ = 0;
  long prompt_tokens_ = 0;
  long completion_tokens_ = 0;
  double cost_ = 0.0;
};

struct RetryPolicy {
  int max_attempts = 4;  // one initial try plus up to three retries
  double initial_backoff_seconds = 0.5;
  double backoff_multiplier = 2.0;
};

/// Issues the request with retries on transient failures; every attempt is
/// logged, including the final failure. Throws LlmError when retries are
/// exhausted or the failure is not retryable.
LlmResponse generate(LlmClient& client, const LlmRequest& request, QueryLogger* log = nullptr,
                     const RetryPolicy& policy = {});

// --- prompt construction ---

/// Mutation instruction catalog, keyed by prompt id.
class PromptSet {
 public:
  /// The three stock mutation instructions (ids 1..3).
  static PromptSet defaults();

  void set(int id, std::string text);
  const std::string& get(int id) const;  // throws ConfigError for unknown ids
  std::vector<int> ids() const;

 private:
  std::map<int, std::string> prompts_;
};

/// Task prompt: optimization goal, bounds, budget, the expected response
/// format, and (when enabled) the landscape prose of every distinct function
/// in the training set. Never reveals optimum locations.
std::string build_task_prompt(const FunctionRegistry& registry,
                              const std::vector<ProblemInstance>& instances, int budget,
                              int dimension, bool include_description);
std::string build_task_prompt(const std::vector<ProblemInstance>& instances, int budget,
                              int dimension, bool include_description);

/// Mutation prompt: the parent's payload, its fitness feedback (4 decimals)
/// and the selected instruction verbatim.
std::string build_mutation_prompt(const Candidate& parent, int prompt_id,
                                  const PromptSet& prompts);

struct ParsedCandidate {
  std::string name;
  std::string description;
  std::string payload;  // first fenced code block
};

/// Extracts the first fenced code block plus "# Name:" / "# Description:"
/// headers. Throws ParseError when no usable block exists.
ParsedCandidate parse_response(const std::string& text);

// --- clients ---

/// Deterministic stand-in for a code-generating LLM: task prompts yield a
/// random solver configuration, mutation prompts perturb the parent config
/// embedded in the prompt ("simplify" drops parameters or shrinks the
/// population, "different" switches the family). Pure function of
/// (mock seed, request seed, request text).
class MockLlmClient : public LlmClient {
 public:
  explicit MockLlmClient(std::uint64_t seed) : seed_(seed) {}
  LlmResponse complete(const LlmRequest& request) override;
  std::string describe() const override;

 private:
  std::uint64_t seed_;
};

/// Cost per 1000 tokens.
struct PriceTable {
  double input_per_1k = 0.0;
  double output_per_1k = 0.0;
};

/// Requests-per-minute limiter shared by all runs using one endpoint.
class TokenBucket {
 public:
  TokenBucket(double capacity, double refill_per_second,
              std::function<double()> clock = {});

  /// Blocks until a token is available; returns the time spent waiting.
  double acquire();

 private:
  std::function<double()> clock_;
  std::mutex mu_;
  double capacity_;
  double rate_;
  double tokens_;
  double last_;
};

struct HttpLlmConfig {
  std::string base_url;  // e.g. "http://localhost:11434" or "https://api.example.com"
  std::string path = "/v1/chat/completions";
  std::string api_key_env = "BLADE_LLM_API_KEY";  // never logged
  double request_timeout_seconds = 120.0;
  double requests_per_minute = 0.0;  // 0 = unlimited
  PriceTable prices;
};

/// OpenAI-style chat-completion client (works against compatible local
/// servers). Credentials come from the environment variable named in the
/// config and are never written to any log.
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(HttpLlmConfig config);
  LlmResponse complete(const LlmRequest& request) override;
  std::string describe() const override;

 private:
  HttpLlmConfig config_;
  TokenBucket limiter_;
};

/// Client selection as configured per experiment.
struct LlmSpec {
  enum class Kind { Mock, Http };
  Kind kind = Kind::Mock;
  std::uint64_t mock_seed = 0;
  std::string model;
  double temperature = 0.7;
  HttpLlmConfig http;
};

std::unique_ptr<LlmClient> make_client(const LlmSpec& spec);

}  // namespace blade
