// Reference external candidate for the line-delimited JSON ask-tell
// protocol, plus deliberately misbehaving modes used by the conformance
// tests.
//
//   external_candidate random     uniform random search until stop
//   external_candidate fixed      always asks the box midpoint
//   external_candidate earlydone  asks one point, then sends done
//   external_candidate garbage    three valid asks, then raw garbage
//   external_candidate wrongdim   two valid asks, then a wrong-size vector
//   external_candidate overask    keeps asking and ignores stop

#include <cstdint>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

using json = nlohmann::json;

namespace {

struct Init {
  int dim = 0;
  std::vector<double> lower, upper;
  long budget = 0;
  std::uint64_t seed = 0;
};

std::uint64_t splitmix(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) {
  return static_cast<double>(splitmix(state) >> 11) * 0x1.0p-53;
}

bool read_message(json& msg) {
  std::string line;
  if (!std::getline(std::cin, line)) return false;
  msg = json::parse(line, nullptr, false);
  return !msg.is_discarded();
}

void send(const json& msg) {
  std::cout << msg.dump() << "\n";
  std::cout.flush();
}

void send_ask(const std::vector<double>& x) { send(json{{"type", "ask"}, {"x", x}}); }

// Returns false when the session should end (stop received or stdin closed).
bool await_tell() {
  json msg;
  if (!read_message(msg)) return false;
  const std::string type = msg.value("type", "");
  if (type == "stop") return false;
  return type == "tell";
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "random";

  json init_msg;
  if (!read_message(init_msg) || init_msg.value("type", "") != "init") return 1;
  Init init;
  init.dim = init_msg.at("dim").get<int>();
  init.lower = init_msg.at("lower").get<std::vector<double>>();
  init.upper = init_msg.at("upper").get<std::vector<double>>();
  init.budget = init_msg.at("budget").get<long>();
  init.seed = init_msg.at("seed").get<std::uint64_t>();

  std::uint64_t state = init.seed;
  std::vector<double> midpoint(init.dim);
  for (int i = 0; i < init.dim; ++i) midpoint[i] = 0.5 * (init.lower[i] + init.upper[i]);

  if (mode == "random" || mode == "fixed" || mode == "overask") {
    const bool heed_stop = mode != "overask";
    for (;;) {
      std::vector<double> x = midpoint;
      if (mode != "fixed")
        for (int i = 0; i < init.dim; ++i)
          x[i] = init.lower[i] + (init.upper[i] - init.lower[i]) * uniform01(state);
      send_ask(x);
      json msg;
      if (!read_message(msg)) return 0;
      const std::string type = msg.value("type", "");
      if (type == "stop") {
        if (heed_stop) return 0;
        continue;  // overask: pretend the stop never happened
      }
      if (type != "tell") return 1;
    }
  }

  if (mode == "earlydone") {
    send_ask(midpoint);
    if (!await_tell()) return 0;
    send(json{{"type", "done"}});
    return 0;
  }

  if (mode == "garbage") {
    for (int i = 0; i < 3; ++i) {
      send_ask(midpoint);
      if (!await_tell()) return 0;
    }
    std::cout << "\x7f" "ELF not a protocol message at all {{{\n";
    std::cout.flush();
    json sink;
    while (read_message(sink)) {
    }
    return 0;
  }

  if (mode == "wrongdim") {
    for (int i = 0; i < 2; ++i) {
      send_ask(midpoint);
      if (!await_tell()) return 0;
    }
    const int bad_dim = init.dim > 3 ? init.dim - 2 : init.dim + 1;
    send_ask(std::vector<double>(bad_dim, 0.0));
    json sink;
    while (read_message(sink)) {
    }
    return 0;
  }

  std::cerr << "unknown mode: " << mode << "\n";
  return 2;
}
