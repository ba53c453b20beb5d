#include "funsearch/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "funsearch/errors.hpp"

namespace funsearch::config {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is not set");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path);
}

}  // namespace

void RunConfig::validate() const {
  require_file(spec_path, "spec file");
  engine.validate();
  if (models.empty()) throw ConfigError("no models configured");
  for (const auto& m : models) m.validate();
  if (!eval.inputs.is_array() || eval.inputs.empty()) throw ConfigError("inputs must be a non-empty array");
  if (!(eval.timeout_s > 0)) throw ConfigError("timeout_s must be > 0");
  if (provider.kind == "scripted") {
    require_file(provider.scripted_path, "scripted replies");
  } else if (provider.kind != "http") {
    throw ConfigError("unknown provider kind '" + provider.kind + "'");
  }
  if (backend.kind == "fake") {
    require_file(backend.fake_table, "fake backend table");
  } else if (backend.kind == "sandbox") {
    if (backend.command.empty()) throw ConfigError("sandbox backend needs a worker command");
  } else {
    throw ConfigError("unknown backend kind '" + backend.kind + "'");
  }
  if (!safety_policy_path.empty()) require_file(safety_policy_path, "safety policy");
  if (!(checkpoint_every >= 0)) throw ConfigError("checkpoint_every must be >= 0");
  if (bench_runs < 1) throw ConfigError("bench_runs must be >= 1");
  if (parallel_runs < 1) throw ConfigError("parallel_runs must be >= 1");
}

json RunConfig::to_json() const {
  json models_json = json::array();
  for (const auto& m : models) models_json.push_back(m.to_json());
  return {{"spec", spec_path},
          {"problem", to_string(eval.problem)},
          {"score_rule", to_string(eval.score_rule)},
          {"inputs", eval.inputs},
          {"entry", eval.entry},
          {"timeout_s", eval.timeout_s},
          {"mem_bytes", eval.mem_bytes},
          {"engine", engine.to_json()},
          {"models", models_json},
          {"token_formula", llm::to_string(token_formula)},
          {"provider",
           {{"kind", provider.kind},
            {"replies", provider.scripted_path},
            {"attempts", provider.retry.attempts},
            {"initial_backoff_ms", provider.retry.initial_backoff.count()},
            {"connect_timeout_s", provider.retry.connect_timeout_s},
            {"read_timeout_s", provider.retry.read_timeout_s}}},
          {"backend",
           {{"kind", backend.kind},
            {"command", backend.command},
            {"table", backend.fake_table},
            {"warm_reuse", backend.warm_reuse},
            {"grace_s", backend.grace_s},
            {"workdir_root", backend.workdir_root}}},
          {"safety_policy", safety_policy_path},
          {"ledger", ledger_path},
          {"report", report_path},
          {"trace", trace_path},
          {"checkpoint_every", checkpoint_every},
          {"bench_runs", bench_runs},
          {"parallel_runs", parallel_runs}};
}

RunConfig RunConfig::from_json(const json& j, const std::string& base_dir) {
  RunConfig c;
  try {
    c.spec_path = resolve(j.value("spec", std::string()), base_dir);
    if (j.contains("problem")) {
      auto p = parse_problem_kind(j["problem"].get<std::string>());
      if (!p) throw ConfigError("unknown problem '" + j["problem"].get<std::string>() + "'");
      c.eval.problem = *p;
    }
    if (j.contains("score_rule")) {
      auto r = parse_score_rule(j["score_rule"].get<std::string>());
      if (!r) throw ConfigError("unknown score rule '" + j["score_rule"].get<std::string>() + "'");
      c.eval.score_rule = *r;
    }
    if (j.contains("inputs")) c.eval.inputs = j["inputs"];
    c.eval.entry = j.value("entry", c.eval.entry);
    c.eval.timeout_s = j.value("timeout_s", c.eval.timeout_s);
    c.eval.mem_bytes = j.value("mem_bytes", c.eval.mem_bytes);
    if (j.contains("engine")) c.engine = engine::EngineConfig::from_json(j["engine"], c.engine);
    for (const auto& m : j.value("models", json::array())) c.models.push_back(llm::ModelConfig::from_json(m));
    if (j.contains("token_formula")) {
      auto f = llm::parse_token_formula(j["token_formula"].get<std::string>());
      if (!f) throw ConfigError("unknown token formula '" + j["token_formula"].get<std::string>() + "'");
      c.token_formula = *f;
    }
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      c.provider.kind = p.value("kind", c.provider.kind);
      c.provider.scripted_path = resolve(p.value("replies", std::string()), base_dir);
      c.provider.retry.attempts = p.value("attempts", c.provider.retry.attempts);
      c.provider.retry.initial_backoff =
          std::chrono::milliseconds(p.value("initial_backoff_ms", c.provider.retry.initial_backoff.count()));
      c.provider.retry.connect_timeout_s = p.value("connect_timeout_s", c.provider.retry.connect_timeout_s);
      c.provider.retry.read_timeout_s = p.value("read_timeout_s", c.provider.retry.read_timeout_s);
    }
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      c.backend.kind = b.value("kind", c.backend.kind);
      c.backend.command = b.value("command", c.backend.command);
      c.backend.fake_table = resolve(b.value("table", std::string()), base_dir);
      c.backend.warm_reuse = b.value("warm_reuse", c.backend.warm_reuse);
      c.backend.grace_s = b.value("grace_s", c.backend.grace_s);
      c.backend.workdir_root = b.value("workdir_root", c.backend.workdir_root);
    }
    c.safety_policy_path = resolve(j.value("safety_policy", std::string()), base_dir);
    c.ledger_path = j.value("ledger", std::string());
    c.report_path = j.value("report", std::string());
    c.trace_path = j.value("trace", std::string());
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.bench_runs = j.value("bench_runs", c.bench_runs);
    c.parallel_runs = j.value("parallel_runs", c.parallel_runs);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j, fs::path(path).parent_path().string());
}

void RunConfig::select_models(const std::vector<std::string>& names) {
  std::vector<llm::ModelConfig> picked;
  for (const auto& name : names) {
    auto it = std::find_if(models.begin(), models.end(), [&](const auto& m) { return m.name == name; });
    if (it == models.end()) throw ConfigError("model '" + name + "' is not configured");
    picked.push_back(*it);
  }
  models = std::move(picked);
}

Resources make_resources(const RunConfig& config) {
  Resources r;
  if (config.provider.kind == "scripted") {
    r.provider = llm::ScriptedProvider::load(config.provider.scripted_path);
  } else {
    r.provider = std::make_shared<llm::HttpChatProvider>(config.provider.retry);
  }
  if (config.backend.kind == "fake") {
    r.backend = eval::FakeBackend::load(config.backend.fake_table);
  } else {
    eval::SandboxBackend::Options o;
    o.command = config.backend.command;
    o.grace_s = config.backend.grace_s;
    o.warm_reuse = config.backend.warm_reuse;
    o.workdir_root = config.backend.workdir_root;
    r.backend = std::make_shared<eval::SandboxBackend>(o);
  }
  r.safety = config.safety_policy_path.empty() ? safety::SafetyPolicy::defaults()
                                               : safety::SafetyPolicy::load(config.safety_policy_path);
  return r;
}

std::string trace_csv(const engine::RunReport& report) {
  std::string out = "n_R,best\n";
  for (const auto& p : report.trace) out += json(p.relative_tokens).dump() + ',' + json(p.best).dump() + '\n';
  return out;
}

engine::RunReport execute_run(const RunConfig& config, const Resources& resources, std::atomic<bool>* stop) {
  config.validate();
  const auto spec = specfmt::load_spec(config.spec_path);
  std::unique_ptr<RunLedger> events =
      config.ledger_path.empty() ? std::make_unique<RunLedger>() : std::make_unique<RunLedger>(config.ledger_path);
  llm::TokenLedger tokens(config.token_formula);
  llm::Gateway gateway(config.models, resources.provider, tokens);
  eval::EvalPool pool(resources.backend, config.engine.evaluators);
  engine::RunOptions options;
  options.eval = config.eval;
  options.safety = resources.safety;
  options.checkpoint_every = config.checkpoint_every;
  options.stop = stop;
  auto report = engine::run_loop(config.engine, options, spec, gateway, pool, *events);
  pool.shutdown(eval::ShutdownMode::drain);
  if (!config.report_path.empty()) {
    std::ofstream out(config.report_path);
    if (!out) throw ConfigError("cannot write report " + config.report_path);
    json j = report.to_json();
    j["config"] = config.to_json();
    out << j.dump(2) << '\n';
  }
  if (!config.trace_path.empty()) {
    std::ofstream out(config.trace_path);
    if (!out) throw ConfigError("cannot write trace " + config.trace_path);
    out << trace_csv(report);
  }
  return report;
}

}  // namespace funsearch::config
