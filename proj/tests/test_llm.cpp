#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "blade/evaluation.hpp"
#include "blade/llm.hpp"
#include "blade/problems.hpp"
#include "blade/rng.hpp"

// keep last: its network headers leak macros that collide with Eigen
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

using namespace blade;

namespace {

LlmRequest request_from(const std::string& prompt, std::uint64_t seed = 0) {
  LlmRequest req;
  req.model = "mock";
  req.messages = {{"user", prompt}};
  req.seed = seed;
  return req;
}

Candidate parent_with(SolverConfig config, double fitness) {
  Candidate c;
  c.id = 3;
  c.name = "Parent";
  c.payload = std::move(config);
  c.fitness = fitness;
  c.status = CandidateStatus::Evaluated;
  return c;
}

// Client that fails with retryable errors a fixed number of times.
class FlakyClient : public LlmClient {
 public:
  FlakyClient(int failures, LlmClient& inner) : failures_(failures), inner_(inner) {}
  LlmResponse complete(const LlmRequest& request) override {
    if (calls_++ < failures_) throw LlmError("simulated HTTP 500", true);
    return inner_.complete(request);
  }
  std::string describe() const override { return "flaky"; }

 private:
  int failures_;
  int calls_ = 0;
  LlmClient& inner_;
};

}  // namespace

TEST_CASE("task prompts expose exactly what the flag allows") {
  SuiteSpec spec;
  spec.kind = SuiteKind::Sbox;
  spec.fids = {2};
  spec.counts = {3, 1, 0};
  spec.master_seed = 9;
  const auto split = suite_split(spec);

  const std::string with = build_task_prompt(split.train, 10000, 5, true);
  CHECK(with.find("Separable Ellipsoidal Function") != std::string::npos);
  CHECK(with.find("Separable Functions") != std::string::npos);
  CHECK(with.find("10000") != std::string::npos);
  CHECK(with.find("minimize") != std::string::npos);

  const std::string without = build_task_prompt(split.train, 10000, 5, false);
  for (int fid : FunctionRegistry::shared().fids()) {
    CHECK(without.find(FunctionRegistry::shared().by_fid(fid).name) == std::string::npos);
  }
  for (auto g : {FunctionGroup::Separable, FunctionGroup::MultimodalWeakStructure})
    CHECK(without.find(std::string(group_display_name(g))) == std::string::npos);

  // optimum locations stay hidden either way
  for (const auto& inst : split.train) {
    for (int i = 0; i < inst.x_opt.size(); ++i)
      CHECK(with.find(fmt_double(inst.x_opt(i))) == std::string::npos);
  }
}

TEST_CASE("group prompts name the group") {
  SuiteSpec spec;
  spec.kind = SuiteKind::Sbox;
  spec.group = FunctionGroup::MultimodalWeakStructure;
  spec.counts = {1, 1, 0};
  const auto split = suite_split(spec);
  const std::string prompt = build_task_prompt(split.train, 500, 5, true);
  CHECK(prompt.find("Multi-modal functions with weak global structure") != std::string::npos);
}

TEST_CASE("mutation prompts quote the instruction verbatim and feed back fitness") {
  const PromptSet prompts = PromptSet::defaults();
  SolverConfig config;
  config.family = SolverFamily::DifferentialEvolution;
  config.params = {{"NP", 30.0}};
  const auto parent = parent_with(config, 0.42);

  const std::string p3 = build_mutation_prompt(parent, 3, prompts);
  CHECK(p3.find("Refine and simplify the selected algorithm to improve it") != std::string::npos);
  CHECK(p3.find("0.4200") != std::string::npos);
  CHECK(p3.find("DifferentialEvolution(NP=30)") != std::string::npos);

  const std::string p2 = build_mutation_prompt(parent, 2, prompts);
  CHECK(p2.find("Generate a new algorithm that is different from the algorithms you have tried "
                "before") != std::string::npos);

  CHECK_THROWS_AS(build_mutation_prompt(parent, 9, prompts), ConfigError);
}

TEST_CASE("parse_response extracts block and headers") {
  SUBCASE("happy path") {
    const auto parsed = parse_response(
        "# Name: CleverES\n# Description: adapts its step size\n```python\nstep one\nstep "
        "two\n```\ntrailing prose\n");
    CHECK(parsed.name == "CleverES");
    CHECK(parsed.description == "adapts its step size");
    CHECK(parsed.payload == "step one\nstep two");
  }
  SUBCASE("first block wins") {
    const auto parsed = parse_response("```\nfirst\n```\n```\nsecond\n```\n");
    CHECK(parsed.payload == "first");
    CHECK(parsed.name == "first");  // identifier fallback
  }
  SUBCASE("no fence is a parse error") {
    CHECK_THROWS_AS(parse_response("prose without any code"), ParseError);
  }
  SUBCASE("empty block is a parse error") {
    CHECK_THROWS_AS(parse_response("```\n\n```"), ParseError);
  }
}

TEST_CASE("mock client is deterministic and always parseable") {
  MockLlmClient mock(7);
  const auto req = request_from("design something", 5);
  const auto a = mock.complete(req);
  const auto b = mock.complete(req);
  CHECK(a.text == b.text);

  const auto other = mock.complete(request_from("design something", 6));
  CHECK(other.text != a.text);

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto resp = mock.complete(request_from("task prompt variant", rng.u64()));
    const auto parsed = parse_response(resp.text);  // never throws, round-trip property
    const auto config = SolverConfig::parse(parsed.payload);
    REQUIRE(config.has_value());
    CHECK_NOTHROW(config->validate());
    CHECK(!parsed.name.empty());
  }
}

TEST_CASE("mock mutation semantics follow the prompt kind") {
  MockLlmClient mock(11);
  const PromptSet prompts = PromptSet::defaults();

  SolverConfig de;
  de.family = SolverFamily::DifferentialEvolution;
  de.params = {{"NP", 30.0}, {"F", 0.5}, {"CR", 0.9}};

  SUBCASE("simplify shrinks the config") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      LlmRequest req = request_from(build_mutation_prompt(parent_with(de, 0.3), 3, prompts), s);
      const auto parsed = SolverConfig::parse(parse_response(mock.complete(req).text).payload);
      REQUIRE(parsed.has_value());
      const bool fewer_params = parsed->params.size() < de.params.size();
      const bool smaller_np = parsed->get("NP", 1e9) < 30.0;
      CHECK((fewer_params || smaller_np));
    }
  }

  SUBCASE("different switches the family") {
    SolverConfig cma;
    cma.family = SolverFamily::CmaEs;
    for (std::uint64_t s = 0; s < 20; ++s) {
      LlmRequest req = request_from(build_mutation_prompt(parent_with(cma, 0.3), 2, prompts), s);
      const auto parsed = SolverConfig::parse(parse_response(mock.complete(req).text).payload);
      REQUIRE(parsed.has_value());
      CHECK(parsed->family != SolverFamily::CmaEs);
    }
  }

  SUBCASE("refine keeps the family and perturbs parameters") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      LlmRequest req = request_from(build_mutation_prompt(parent_with(de, 0.3), 1, prompts), s);
      const auto parsed = SolverConfig::parse(parse_response(mock.complete(req).text).payload);
      REQUIRE(parsed.has_value());
      CHECK(parsed->family == SolverFamily::DifferentialEvolution);
      CHECK(parsed->params.size() == de.params.size());
    }
  }

  SUBCASE("an unparseable parent resamples a fresh config") {
    Candidate ext;
    ext.id = 4;
    ext.name = "ExternalParent";
    ext.fitness = 0.2;
    ExternalSpec spec;
    spec.source = "def optimize(problem):\n    pass";
    ext.payload = spec;
    LlmRequest req = request_from(build_mutation_prompt(ext, 1, prompts), 1);
    const auto resp = mock.complete(req);
    const auto parsed = SolverConfig::parse(parse_response(resp.text).payload);
    CHECK(parsed.has_value());
    CHECK(resp.text.find("resampled") != std::string::npos);
  }
}

TEST_CASE("generate retries transient failures and logs every attempt") {
  MockLlmClient inner(5);
  QueryLogger log;
  RetryPolicy fast;
  fast.initial_backoff_seconds = 0.0;

  SUBCASE("two failures then success: three log entries") {
    FlakyClient flaky(2, inner);
    const auto resp = generate(flaky, request_from("hello", 1), &log, fast);
    CHECK(!resp.text.empty());
    CHECK(log.entries() == 3);
  }

  SUBCASE("exhausted retries surface the error") {
    FlakyClient flaky(10, inner);
    CHECK_THROWS_AS(generate(flaky, request_from("hello", 1), &log, fast), LlmError);
    CHECK(log.entries() == fast.max_attempts);
  }

  SUBCASE("token accounting accumulates successful responses") {
    const auto r1 = generate(inner, request_from("one two three", 1), &log, fast);
    const auto r2 = generate(inner, request_from("four five", 2), &log, fast);
    CHECK(log.total_prompt_tokens() == r1.usage.prompt_tokens + r2.usage.prompt_tokens);
    CHECK(log.total_completion_tokens() ==
          r1.usage.completion_tokens + r2.usage.completion_tokens);
    CHECK(log.entries() == 2);
  }
}

TEST_CASE("query log files hold one record per attempt") {
  const auto path = std::filesystem::temp_directory_path() /
                    ("blade_qlog_" + std::to_string(::getpid()) + ".jsonl");
  {
    QueryLogger log(path);
    MockLlmClient inner(5);
    FlakyClient flaky(1, inner);
    RetryPolicy fast;
    fast.initial_backoff_seconds = 0.0;
    generate(flaky, request_from("hi", 1), &log, fast);
  }
  std::ifstream in(path);
  int lines = 0;
  std::string line;
  bool saw_error = false, saw_ok = false;
  while (std::getline(in, line)) {
    ++lines;
    saw_error |= line.find("\"outcome\":\"error\"") != std::string::npos;
    saw_ok |= line.find("\"outcome\":\"ok\"") != std::string::npos;
  }
  CHECK(lines == 2);
  CHECK(saw_error);
  CHECK(saw_ok);
  std::filesystem::remove(path);
}

TEST_CASE("http client speaks the chat-completion contract end to end") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_body, seen_auth;
  std::mutex seen_mu;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++hits;
    if (n <= 2) {
      res.status = 500;
      res.set_content("overloaded", "text/plain");
      return;
    }
    {
      std::lock_guard lock(seen_mu);
      seen_body = req.body;
      seen_auth = req.get_header_value("Authorization");
    }
    res.set_content(
        R"({"choices":[{"message":{"role":"assistant","content":"# Name: X\n```\nRandomSearch()\n```"}}],)"
        R"("usage":{"prompt_tokens":21,"completion_tokens":9}})",
        "application/json");
  });

  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));

  setenv("BLADE_TEST_LLM_KEY", "sk-test", 1);
  HttpLlmConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.api_key_env = "BLADE_TEST_LLM_KEY";
  config.prices = {0.5, 1.0};
  HttpLlmClient client(config);

  QueryLogger log;
  LlmRequest req;
  req.model = "test-model";
  req.messages = {{"system", "be brief"}, {"user", "produce an optimizer"}};
  RetryPolicy fast;
  fast.initial_backoff_seconds = 0.0;

  const auto resp = generate(client, req, &log, fast);
  server.stop();
  server_thread.join();

  CHECK(hits == 3);  // two 500s then success
  CHECK(log.entries() == 3);
  {
    std::lock_guard lock(seen_mu);
    CHECK(seen_body.find("\"model\":\"test-model\"") != std::string::npos);
    CHECK(seen_auth == "Bearer sk-test");
  }
  CHECK(resp.usage.prompt_tokens == 21);  // pass-through accounting
  CHECK(resp.usage.completion_tokens == 9);
  CHECK(resp.cost == doctest::Approx(21.0 / 1000 * 0.5 + 9.0 / 1000 * 1.0));
  CHECK(parse_response(resp.text).payload == "RandomSearch()");
}

TEST_CASE("the endpoint environment override takes effect") {
  LlmSpec spec;
  spec.kind = LlmSpec::Kind::Http;
  spec.model = "m";
  spec.http.base_url = "http://configured:1234";
  setenv("BLADE_LLM_BASE_URL", "http://overridden:9999", 1);
  const auto client = make_client(spec);
  CHECK(client->describe().find("overridden:9999") != std::string::npos);
  unsetenv("BLADE_LLM_BASE_URL");
  const auto plain = make_client(spec);
  CHECK(plain->describe().find("configured:1234") != std::string::npos);
}

TEST_CASE("token bucket paces requests with an injected clock") {
  double fake_now = 0.0;
  TokenBucket bucket(1.0, 2.0, [&] { return fake_now; });  // 2 tokens per second
  CHECK(bucket.acquire() == 0.0);  // initial capacity
  // bucket now empty; without advancing time acquire would have to wait,
  // so advance the clock as the wait would
  fake_now += 0.5;
  CHECK(bucket.acquire() == 0.0);
}
