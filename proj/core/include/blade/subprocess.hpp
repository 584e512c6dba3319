#pragma once

#include <optional>
#include <string>
#include <vector>

#include "blade/util.hpp"

namespace blade {

/// A child process with piped stdin/stdout and deadline-based line IO.
/// One child per run; killed and reaped on destruction.
class Subprocess {
 public:
  static Subprocess spawn(const std::vector<std::string>& argv);  // throws SpawnError

  Subprocess(Subprocess&& other) noexcept;
  Subprocess& operator=(Subprocess&& other) noexcept;
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;
  ~Subprocess();

  /// Writes line + '\n'. Returns false if the child stopped reading.
  bool write_line(const std::string& line, double timeout_seconds);
  /// Next full line (without '\n'); nullopt on EOF. Throws TimeoutError.
  std::optional<std::string> read_line(double timeout_seconds);

  void close_stdin();
  bool running();
  /// Waits up to grace_seconds for a voluntary exit, then SIGKILLs.
  void terminate(double grace_seconds);

 private:
  Subprocess() = default;

  int pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::string buffer_;
  bool reaped_ = false;
};

}  // namespace blade
