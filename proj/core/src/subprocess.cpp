#include "blade/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "blade/candidates.hpp"  // ProtocolError, SpawnError, TimeoutError

namespace blade {
namespace {

void ignore_sigpipe_once() {
  static const bool done = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

Subprocess Subprocess::spawn(const std::vector<std::string>& argv) {
  if (argv.empty()) throw SpawnError("empty launch command");
  ignore_sigpipe_once();

  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0 || ::pipe(err_pipe) != 0)
    throw SpawnError("pipe() failed: " + std::string(std::strerror(errno)));
  // err_pipe carries the child's exec errno back; closed on successful exec.
  ::fcntl(err_pipe[1], F_SETFD, FD_CLOEXEC);

  const int pid = ::fork();
  if (pid < 0) throw SpawnError("fork() failed: " + std::string(std::strerror(errno)));

  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[0]);

    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execvp(args[0], args.data());

    const int err = errno;
    (void)!::write(err_pipe[1], &err, sizeof(err));
    ::_exit(127);
  }

  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);

  int exec_errno = 0;
  const ssize_t n = ::read(err_pipe[0], &exec_errno, sizeof(exec_errno));
  ::close(err_pipe[0]);
  if (n > 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    int status = 0;
    ::waitpid(pid, &status, 0);
    throw SpawnError("cannot execute '" + argv[0] + "': " + std::strerror(exec_errno));
  }

  Subprocess p;
  p.pid_ = pid;
  p.stdin_fd_ = in_pipe[1];
  p.stdout_fd_ = out_pipe[0];
  return p;
}

Subprocess::Subprocess(Subprocess&& other) noexcept { *this = std::move(other); }

Subprocess& Subprocess::operator=(Subprocess&& other) noexcept {
  if (this != &other) {
    terminate(0.0);
    pid_ = other.pid_;
    stdin_fd_ = other.stdin_fd_;
    stdout_fd_ = other.stdout_fd_;
    buffer_ = std::move(other.buffer_);
    reaped_ = other.reaped_;
    other.pid_ = -1;
    other.stdin_fd_ = -1;
    other.stdout_fd_ = -1;
    other.reaped_ = true;
  }
  return *this;
}

Subprocess::~Subprocess() { terminate(0.0); }

bool Subprocess::write_line(const std::string& line, double timeout_seconds) {
  if (stdin_fd_ < 0) return false;
  std::string data = line;
  data.push_back('\n');
  std::size_t written = 0;
  const double deadline = now_seconds() + timeout_seconds;
  while (written < data.size()) {
    struct pollfd pfd{stdin_fd_, POLLOUT, 0};
    const double remaining = deadline - now_seconds();
    if (remaining <= 0) throw TimeoutError("timed out writing to candidate");
    const int pr = ::poll(&pfd, 1, static_cast<int>(remaining * 1000) + 1);
    if (pr < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    if (pr == 0) throw TimeoutError("timed out writing to candidate");
    const ssize_t n = ::write(stdin_fd_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;  // EPIPE: child went away
    }
    written += static_cast<std::size_t>(n);
  }
  return true;
}

std::optional<std::string> Subprocess::read_line(double timeout_seconds) {
  const double deadline = now_seconds() + timeout_seconds;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (stdout_fd_ < 0) return std::nullopt;

    struct pollfd pfd{stdout_fd_, POLLIN, 0};
    const double remaining = deadline - now_seconds();
    if (remaining <= 0) throw TimeoutError("timed out waiting for candidate output");
    const int pr = ::poll(&pfd, 1, static_cast<int>(remaining * 1000) + 1);
    if (pr < 0) {
      if (errno == EINTR) continue;
      return std::nullopt;
    }
    if (pr == 0) throw TimeoutError("timed out waiting for candidate output");

    char chunk[4096];
    const ssize_t n = ::read(stdout_fd_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      return std::nullopt;
    }
    if (n == 0) {  // EOF: flush any unterminated tail
      if (!buffer_.empty()) {
        std::string line = std::move(buffer_);
        buffer_.clear();
        return line;
      }
      return std::nullopt;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void Subprocess::close_stdin() {
  if (stdin_fd_ >= 0) {
    ::close(stdin_fd_);
    stdin_fd_ = -1;
  }
}

bool Subprocess::running() {
  if (pid_ < 0 || reaped_) return false;
  int status = 0;
  const int r = ::waitpid(pid_, &status, WNOHANG);
  if (r == pid_) {
    reaped_ = true;
    return false;
  }
  return r == 0;
}

void Subprocess::terminate(double grace_seconds) {
  if (pid_ < 0) return;
  close_stdin();
  if (!reaped_) {
    const double deadline = now_seconds() + grace_seconds;
    while (now_seconds() < deadline) {
      if (!running()) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (!reaped_) {
      ::kill(pid_, SIGKILL);
      int status = 0;
      ::waitpid(pid_, &status, 0);
      reaped_ = true;
    }
  }
  if (stdout_fd_ >= 0) {
    ::close(stdout_fd_);
    stdout_fd_ = -1;
  }
  pid_ = -1;
}

}  // namespace blade
