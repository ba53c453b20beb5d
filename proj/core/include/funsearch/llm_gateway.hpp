#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "funsearch/spec_format.hpp"

namespace funsearch::llm {

struct ModelConfig {
  std::string name;
  std::string endpoint;     ///< chat-completions URL
  std::string api_key_env;  ///< environment variable holding the bearer key
  double price_in = 1.0;    ///< p_I, currency per input token
  double price_out = 1.0;   ///< p_O, currency per output token
  double temperature = 1.0;
  int max_tokens = 1024;
  double weight = 1.0;

  /// Throws ConfigError on a non-positive input price, negative output
  /// price or negative weight.
  void validate() const;
  static ModelConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// `price_ratio`: n_R = (p_O / p_I) n_I + n_O.
/// `cost_normalized`: n_R = (p_I / p_O) n_I + n_O.
enum class TokenFormula { price_ratio, cost_normalized };

std::optional<TokenFormula> parse_token_formula(const std::string& name);
std::string to_string(TokenFormula f);

double relative_tokens(const ModelConfig& model, std::uint64_t n_in, std::uint64_t n_out,
                       TokenFormula formula = TokenFormula::price_ratio);

struct ModelUsage {
  std::uint64_t n_in = 0;
  std::uint64_t n_out = 0;
  double relative = 0.0;
  double cost = 0.0;  ///< p_I n_I + p_O n_O
  std::uint64_t calls = 0;
  std::uint64_t estimated_calls = 0;
};

/// Per-model token counters and the run's relative-token total. All methods
/// are thread-safe.
class TokenLedger {
 public:
  explicit TokenLedger(TokenFormula formula = TokenFormula::price_ratio) : formula_(formula) {}

  /// Adds a completion's usage and returns its relative-token delta.
  double record(const ModelConfig& model, std::uint64_t n_in, std::uint64_t n_out,
                bool estimated = false);

  double relative_total() const;
  TokenFormula formula() const { return formula_; }
  std::map<std::string, ModelUsage> usage() const;
  int in_flight() const;
  nlohmann::json snapshot() const;

  /// Holds one admitted request slot; releases it on destruction.
  class Reservation {
   public:
    Reservation(Reservation&& other) noexcept : ledger_(other.ledger_) { other.ledger_ = nullptr; }
    Reservation& operator=(Reservation&&) = delete;
    Reservation(const Reservation&) = delete;
    ~Reservation();

   private:
    friend class TokenLedger;
    explicit Reservation(TokenLedger* ledger) : ledger_(ledger) {}
    TokenLedger* ledger_;
  };

  /// Atomic budget check-and-issue: admits a new request only while the
  /// relative total is below `budget`.
  std::optional<Reservation> try_admit(double budget);

 private:
  TokenFormula formula_;
  mutable std::mutex mu_;
  std::map<std::string, ModelUsage> usage_;
  double total_ = 0.0;
  int in_flight_ = 0;
};

struct Attempt {
  int status = 0;  ///< HTTP status, 0 for a transport failure
  std::string error;
  double latency_s = 0.0;
};

struct Completion {
  std::string text;
  std::uint64_t n_in = 0;
  std::uint64_t n_out = 0;
  std::string model;
  double latency_s = 0.0;
  bool estimated = false;  ///< token counts derived from text length
  std::vector<Attempt> attempts;
};

/// ceil(chars / 4).
std::uint64_t estimate_tokens(std::string_view text);

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  /// Throws GatewayError once the provider's retry policy is exhausted.
  virtual Completion complete(const specfmt::PromptBundle& bundle, const ModelConfig& model) = 0;
};

/// Replays canned {text, n_I, n_O} replies in order, cycling at the end.
/// Replies without token counts are estimated from text length.
class ScriptedProvider : public ChatProvider {
 public:
  struct Reply {
    std::string text;
    std::optional<std::uint64_t> n_in;
    std::optional<std::uint64_t> n_out;
  };

  explicit ScriptedProvider(std::vector<Reply> replies);
  /// JSONL file, one reply object per line.
  static std::shared_ptr<ScriptedProvider> load(const std::string& path);

  Completion complete(const specfmt::PromptBundle& bundle, const ModelConfig& model) override;
  std::size_t served() const;

 private:
  std::vector<Reply> replies_;
  mutable std::mutex mu_;
  std::size_t next_ = 0;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double connect_timeout_s = 10.0;
  double read_timeout_s = 120.0;
};

/// OpenAI-style chat-completions over HTTP(S) with bearer-key auth.
/// 429, 5xx and transport errors are retried with exponential backoff;
/// 401/403 fail immediately.
class HttpChatProvider : public ChatProvider {
 public:
  explicit HttpChatProvider(RetryPolicy policy = {}) : policy_(policy) {}
  Completion complete(const specfmt::PromptBundle& bundle, const ModelConfig& model) override;

  /// The request body: exactly {model, messages, temperature, max_tokens}.
  static nlohmann::json request_body(const specfmt::PromptBundle& bundle, const ModelConfig& model);

 private:
  RetryPolicy policy_;
};

/// Draws a model with probability proportional to its weight.
/// Throws ConfigError when no model has positive weight.
const ModelConfig& pick_model(const std::vector<ModelConfig>& configs, std::mt19937_64& rng);

/// Model mixing plus accounting: pick a model, complete, record usage.
class Gateway {
 public:
  Gateway(std::vector<ModelConfig> models, std::shared_ptr<ChatProvider> provider,
          TokenLedger& ledger);

  struct Result {
    Completion completion;
    double delta = 0.0;
  };

  Result complete(const specfmt::PromptBundle& bundle, std::mt19937_64& rng);
  const std::vector<ModelConfig>& models() const { return models_; }
  TokenLedger& ledger() { return ledger_; }

 private:
  std::vector<ModelConfig> models_;
  std::shared_ptr<ChatProvider> provider_;
  TokenLedger& ledger_;
};

}  // namespace funsearch::llm
