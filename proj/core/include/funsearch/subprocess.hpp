#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>

namespace funsearch {

/// Child process with piped stdin/stdout/stderr, used for sandbox workers.
/// The child runs in its own process group; kill() signals the whole group.
class Subprocess {
 public:
  struct Options {
    std::vector<std::string> argv;
    std::string working_dir;  ///< empty: inherit
  };

  explicit Subprocess(const Options& options);
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;
  ~Subprocess();

  pid_t pid() const { return pid_; }

  /// Writes `line` plus '\n'. False if the child closed its stdin.
  bool write_line(const std::string& line);

  enum class ReadStatus { ok, timeout, closed };
  /// Reads one '\n'-terminated line from stdout, draining stderr meanwhile.
  ReadStatus read_line(std::string& line, std::chrono::steady_clock::time_point deadline);

  /// Last bytes written to stderr (bounded).
  std::string stderr_tail() const { return stderr_tail_; }

  bool running();
  void kill();
  /// Reaps the child; returns its wait status or nullopt if already reaped.
  std::optional<int> wait();

 private:
  void drain_stderr();

  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  int stderr_fd_ = -1;
  bool reaped_ = false;
  std::string stdout_buffer_;
  std::string stderr_tail_;
};

}  // namespace funsearch
