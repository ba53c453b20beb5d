#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "funsearch/construction.hpp"
#include "funsearch/spec_format.hpp"

namespace funsearch::eval {

struct EvalRequest {
  std::string id;
  specfmt::CandidateCode candidate;
  std::string entry = "evaluate";
  nlohmann::json inputs = nlohmann::json::array();  ///< run-entry arguments
  double timeout_s = 30.0;                          ///< per input
  std::uint64_t mem_bytes = 1ULL << 30;
  ProblemKind problem = ProblemKind::custom;
  ScoreRule score_rule = ScoreRule::size;

  /// Throws ValidationError for empty inputs or a non-positive timeout.
  void validate() const;
};

enum class FailureKind { none, timeout, crash, invalid_score };

std::string to_string(FailureKind f);

struct InputOutcome {
  double score = 0.0;
  std::optional<nlohmann::json> construction;
  FailureKind failure = FailureKind::none;
  std::string message;

  bool ok() const { return failure == FailureKind::none; }
};

struct EvalResult {
  std::string request_id;
  std::vector<InputOutcome> outcomes;
  double duration_s = 0.0;
  bool verified = false;
  std::string stderr_tail;

  bool ok() const;
  /// First failing outcome's kind, or none.
  FailureKind failure() const;
  std::string failure_message() const;
  /// Sum of per-input scores.
  double aggregate() const;
  std::vector<double> scores() const;

  static EvalResult failed(const std::string& id, std::size_t inputs, FailureKind kind,
                           const std::string& message);
};

/// Executes one candidate. Implementations must be safe to call from
/// several pool threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual EvalResult evaluate(const EvalRequest& request) = 0;
  /// Terminates in-flight work (used by a killing shutdown).
  virtual void cancel_all() {}
  /// Whether results for built-in problems must carry constructions to
  /// count as verified.
  virtual bool requires_constructions() const { return true; }
};

/// Canned results keyed by the code hash of the evolved function, or by a
/// substring of it. Entries: {code_hash | contains, scores:[...],
/// constructions?:[...], verified?: bool, failure?: "timeout"|"crash",
/// delay_ms?, spin_ms?}.
class FakeBackend : public Backend {
 public:
  struct Entry {
    std::optional<std::string> code_hash;
    std::optional<std::string> contains;
    std::vector<double> scores;
    std::vector<std::optional<nlohmann::json>> constructions;
    bool verified = true;
    FailureKind failure = FailureKind::none;
    int delay_ms = 0;  ///< sleeps
    int spin_ms = 0;   ///< burns CPU
  };

  explicit FakeBackend(std::vector<Entry> entries, std::optional<Entry> fallback = std::nullopt);
  static std::shared_ptr<FakeBackend> from_json(const nlohmann::json& table);
  static std::shared_ptr<FakeBackend> load(const std::string& path);

  EvalResult evaluate(const EvalRequest& request) override;
  bool requires_constructions() const override { return false; }
  std::size_t calls() const { return calls_.load(); }

 private:
  const Entry* match(const specfmt::CandidateCode& code) const;

  std::vector<Entry> entries_;
  std::optional<Entry> fallback_;
  std::atomic<std::size_t> calls_{0};
};

/// Runs candidates in worker processes speaking newline-delimited JSON:
///   request  {"id","program","entry","inputs","timeout_s"}
///   response {"id","ok","results":[{"score","construction"}],"error","stderr_tail"}
/// The worker is launched as `command... --cpu-seconds N --mem-bytes M
/// --workdir DIR` in a fresh temporary directory and is killed when the
/// request outlives timeout_s x |inputs| plus a grace period.
class SandboxBackend : public Backend {
 public:
  struct Options {
    std::vector<std::string> command;
    double grace_s = 1.0;
    bool warm_reuse = false;  ///< keep workers alive across candidates
    std::string workdir_root; ///< empty: system temp directory
  };

  explicit SandboxBackend(Options options);
  ~SandboxBackend() override;

  EvalResult evaluate(const EvalRequest& request) override;
  void cancel_all() override;

  /// Protocol helpers, exposed for conformance tests.
  static nlohmann::json request_json(const EvalRequest& request);
  static EvalResult parse_response(const EvalRequest& request, const std::string& line);

 private:
  struct Worker;
  std::unique_ptr<Worker> acquire(const EvalRequest& request);
  void release(std::unique_ptr<Worker> worker);

  Options options_;
  std::mutex mu_;
  std::vector<std::unique_ptr<Worker>> idle_;
  std::vector<Worker*> busy_;
};

/// Re-checks every returned construction with the native verifier and its
/// score under `rule`. A built-in problem outcome without a construction,
/// or any mismatch, fails verification. Custom problems are not checked.
bool verify_result(const EvalResult& result, ProblemKind problem, ScoreRule rule);

enum class ShutdownMode { drain, kill };

/// Fixed set of evaluator threads consuming a FIFO queue. Each submission
/// resolves exactly once.
class EvalPool {
 public:
  EvalPool(std::shared_ptr<Backend> backend, int evaluators);
  EvalPool(const EvalPool&) = delete;
  EvalPool& operator=(const EvalPool&) = delete;
  ~EvalPool();

  std::future<EvalResult> submit(EvalRequest request);
  void submit(EvalRequest request, std::function<void(EvalResult)> on_done);
  /// Blocking convenience wrapper.
  EvalResult evaluate(EvalRequest request) { return submit(std::move(request)).get(); }

  void shutdown(ShutdownMode mode = ShutdownMode::drain);
  int evaluators() const { return static_cast<int>(threads_.size()); }
  std::size_t pending() const;

 private:
  struct Job {
    EvalRequest request;
    std::function<void(EvalResult)> done;
  };

  void run();
  EvalResult process(const EvalRequest& request);

  std::shared_ptr<Backend> backend_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Job> queue_;
  bool stopping_ = false;
  bool killing_ = false;
  std::vector<std::thread> threads_;
};

}  // namespace funsearch::eval
