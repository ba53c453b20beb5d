#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "funsearch/construction.hpp"
#include "funsearch/eval_pool.hpp"
#include "funsearch/llm_gateway.hpp"
#include "funsearch/run_ledger.hpp"
#include "funsearch/safety.hpp"
#include "funsearch/spec_format.hpp"

namespace funsearch::engine {

struct ResetInterval {
  enum class Unit { tokens, minutes };
  Unit unit = Unit::tokens;
  double amount = 1e5;

  /// "tokens:N" or "minutes:N" with N > 0; "short" and "long" are 15 and
  /// 60 minutes. Throws ConfigError.
  static ResetInterval parse(const std::string& text);
  std::string to_string() const;
};

struct EngineConfig {
  int island_count = 10;
  int prompt_programs = 2;
  int samplers = 10;
  int evaluators = 8;
  ResetInterval reset_interval;
  double temperature = 0.2;
  double budget = 2e6;  ///< relative tokens
  std::uint64_t seed = 0;

  /// Throws ConfigError. A zero budget is accepted and halts right after
  /// seeding.
  void validate() const;
  /// Fields absent from `j` keep their value in `base`.
  static EngineConfig from_json(const nlohmann::json& j, EngineConfig base);
  static EngineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct CandidateProgram {
  std::string id;
  specfmt::CandidateCode code;
  std::string hash;  ///< code_hash of the evolved function
  std::vector<double> per_input_scores;
  double aggregate_score = 0.0;
  int island_id = 0;
  std::uint64_t registered_at = 0;
  std::vector<std::optional<nlohmann::json>> constructions;
};

struct Island {
  int id = 0;
  std::vector<std::string> members;
  double best_score = -std::numeric_limits<double>::infinity();
  std::string best_program_id;
  std::uint64_t last_improvement = 0;
};

/// Islands to empty and the surviving island each one is refilled from.
struct ResetPlan {
  std::vector<int> targets;
  std::vector<int> sources;
};

struct ResetReport {
  ResetPlan plan;
  std::vector<std::string> copies;  ///< ids of the reseeded programs
};

struct PromptSample {
  int island = 0;
  std::vector<CandidateProgram> programs;
};

enum class RegisterOutcome { stored, duplicate };
std::string to_string(RegisterOutcome o);

/// Island-model population. Not internally synchronized: the run loop
/// serializes every mutation behind one lock.
class ProgramDatabase {
 public:
  explicit ProgramDatabase(int island_count);

  /// Registers `code` on every island. Throws ValidationError when already
  /// seeded or when a score is non-finite. Returns the copies' ids.
  std::vector<std::string> seed(const specfmt::CandidateCode& code, std::vector<double> scores,
                                std::uint64_t at,
                                std::vector<std::optional<nlohmann::json>> constructions = {});

  /// Appends to `island` unless the island already holds the same code hash.
  /// Throws ValidationError for non-finite scores or an invalid island.
  RegisterOutcome register_program(int island, const specfmt::CandidateCode& code,
                                   std::vector<double> scores, std::uint64_t at,
                                   std::vector<std::optional<nlohmann::json>> constructions = {},
                                   std::string* id_out = nullptr);

  PromptSample sample_for_prompt(std::mt19937_64& rng, int max_programs, double temperature) const;

  /// Selection weights of an island's members, in member order.
  std::vector<double> selection_weights(int island, double temperature) const;

  ResetPlan plan_reset(std::mt19937_64& rng) const;
  ResetReport apply_reset(const ResetPlan& plan, std::uint64_t at);
  ResetReport island_reset(std::mt19937_64& rng, std::uint64_t at);

  bool seeded() const { return seeded_; }
  int island_count() const { return static_cast<int>(islands_.size()); }
  const Island& island(int id) const;
  const CandidateProgram& program(const std::string& id) const;
  const CandidateProgram* best() const;
  int best_island() const;
  std::size_t program_count() const { return programs_.size(); }

  std::vector<std::vector<std::string>> membership() const;
  /// Per-island best equals the max member score and the global best is
  /// the max over islands.
  bool check_invariants() const;

  /// Rebuilds a database from a run ledger's seed, register and reset
  /// events. Program code is not recorded there, only hashes and scores.
  static ProgramDatabase replay(int island_count, const std::vector<nlohmann::json>& events);

 private:
  std::string add(int island, CandidateProgram program, std::uint64_t at);

  std::vector<Island> islands_;
  std::map<std::string, CandidateProgram> programs_;
  std::uint64_t next_id_ = 0;
  std::string best_id_;
  bool seeded_ = false;
};

struct RunCounts {
  std::uint64_t samples = 0;
  std::uint64_t llm_responses = 0;
  std::uint64_t extraction_failures = 0;
  std::uint64_t safety_rejections = 0;
  std::uint64_t eval_failures = 0;
  std::uint64_t verification_failures = 0;
  std::uint64_t registered = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t resets = 0;
};

struct TracePoint {
  double relative_tokens = 0.0;
  double best = 0.0;
};

enum class HaltReason { budget, stop, gateway_error, error };
std::string to_string(HaltReason r);

struct RunReport {
  std::optional<CandidateProgram> best;
  double best_score = 0.0;
  double seed_score = 0.0;
  RunCounts counts;
  HaltReason halt = HaltReason::budget;
  std::string error;
  bool partial = false;
  double relative_total = 0.0;
  nlohmann::json token_usage;
  std::vector<TracePoint> trace;
  std::vector<std::vector<std::string>> membership;

  nlohmann::json to_json() const;
};

/// Evaluation settings for every candidate of a run.
struct EvalSettings {
  nlohmann::json inputs = nlohmann::json::array();
  std::string entry = "evaluate";
  double timeout_s = 30.0;
  std::size_t mem_bytes = std::size_t{1} << 30;
  ProblemKind problem = ProblemKind::custom;
  ScoreRule score_rule = ScoreRule::size;
};

struct RunOptions {
  EvalSettings eval;
  safety::SafetyPolicy safety = safety::SafetyPolicy::defaults();
  double checkpoint_every = 0.0;  ///< relative tokens; 0 disables the trace
  std::atomic<bool>* stop = nullptr;
};

/// sample -> prompt -> LLM -> extract -> screen -> evaluate -> verify ->
/// register, until the token budget is spent or `stop` is set. Throws
/// EvaluationError when the seed program fails. The pool must have been
/// built with `config.evaluators` workers by the caller.
RunReport run_loop(const EngineConfig& config, const RunOptions& options, const specfmt::ProblemSpec& spec,
                   llm::Gateway& gateway, eval::EvalPool& pool, RunLedger& ledger);

}  // namespace funsearch::engine
