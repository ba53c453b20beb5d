#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "funsearch/engine.hpp"
#include "funsearch/eval_pool.hpp"
#include "funsearch/llm_gateway.hpp"
#include "funsearch/safety.hpp"

namespace funsearch::config {

struct ProviderConfig {
  std::string kind = "http";  ///< http | scripted
  std::string scripted_path;  ///< JSONL replies for `scripted`
  llm::RetryPolicy retry;
};

struct BackendConfig {
  std::string kind = "sandbox";  ///< sandbox | fake
  std::vector<std::string> command;  ///< worker argv for `sandbox`
  std::string fake_table;            ///< JSON table for `fake`
  bool warm_reuse = false;
  double grace_s = 1.0;
  std::string workdir_root;
};

/// Everything a run needs. Relative paths in a config file are resolved
/// against the file's directory.
struct RunConfig {
  std::string spec_path;
  engine::EngineConfig engine;
  engine::EvalSettings eval;
  std::vector<llm::ModelConfig> models;
  llm::TokenFormula token_formula = llm::TokenFormula::price_ratio;
  ProviderConfig provider;
  BackendConfig backend;
  std::string safety_policy_path;  ///< empty: built-in defaults
  std::string ledger_path;
  std::string report_path;
  std::string trace_path;
  double checkpoint_every = 1e4;
  int bench_runs = 8;
  int parallel_runs = 1;

  /// Throws ConfigError when referenced files are missing or values are out
  /// of range.
  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir = {});
  static RunConfig load(const std::string& path);

  /// Keeps only the named models, in the given order. Throws ConfigError
  /// for an unknown name.
  void select_models(const std::vector<std::string>& names);
};

/// Live collaborators built from a config.
struct Resources {
  std::shared_ptr<llm::ChatProvider> provider;
  std::shared_ptr<eval::Backend> backend;
  safety::SafetyPolicy safety;
};

Resources make_resources(const RunConfig& config);

/// One complete run: seeds, evolves until the budget is spent and writes
/// the ledger/report files named in the config. Setting `*stop` ends the
/// run early.
engine::RunReport execute_run(const RunConfig& config, const Resources& resources,
                              std::atomic<bool>* stop = nullptr);

/// Columns n_R,best.
std::string trace_csv(const engine::RunReport& report);

}  // namespace funsearch::config
