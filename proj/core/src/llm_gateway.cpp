#include "funsearch/llm_gateway.hpp"

#include <chrono>
#include <fstream>

#include "funsearch/errors.hpp"

namespace funsearch::llm {

using nlohmann::json;

void ModelConfig::validate() const {
  if (name.empty()) throw ConfigError("model name must not be empty");
  if (!(price_in > 0.0)) throw ConfigError("model " + name + ": input price p_I must be > 0");
  if (!(price_out >= 0.0)) throw ConfigError("model " + name + ": output price p_O must be >= 0");
  if (!(weight >= 0.0)) throw ConfigError("model " + name + ": weight must be >= 0");
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig m;
  try {
    m.name = j.at("name").get<std::string>();
    m.endpoint = j.value("endpoint", m.endpoint);
    m.api_key_env = j.value("api_key_env", m.api_key_env);
    m.price_in = j.value("price_in", m.price_in);
    m.price_out = j.value("price_out", m.price_out);
    m.temperature = j.value("temperature", m.temperature);
    m.max_tokens = j.value("max_tokens", m.max_tokens);
    m.weight = j.value("weight", m.weight);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  m.validate();
  return m;
}

json ModelConfig::to_json() const {
  return {{"name", name},         {"endpoint", endpoint},       {"api_key_env", api_key_env},
          {"price_in", price_in}, {"price_out", price_out},     {"temperature", temperature},
          {"max_tokens", max_tokens}, {"weight", weight}};
}

std::optional<TokenFormula> parse_token_formula(const std::string& name) {
  if (name == "price_ratio") return TokenFormula::price_ratio;
  if (name == "cost_normalized") return TokenFormula::cost_normalized;
  return std::nullopt;
}

std::string to_string(TokenFormula f) {
  return f == TokenFormula::price_ratio ? "price_ratio" : "cost_normalized";
}

double relative_tokens(const ModelConfig& model, std::uint64_t n_in, std::uint64_t n_out,
                       TokenFormula formula) {
  const double ratio = formula == TokenFormula::price_ratio ? model.price_out / model.price_in
                                                      : model.price_in / model.price_out;
  return ratio * static_cast<double>(n_in) + static_cast<double>(n_out);
}

double TokenLedger::record(const ModelConfig& model, std::uint64_t n_in, std::uint64_t n_out,
                           bool estimated) {
  const double delta = relative_tokens(model, n_in, n_out, formula_);
  std::lock_guard lock(mu_);
  auto& u = usage_[model.name];
  u.n_in += n_in;
  u.n_out += n_out;
  u.relative += delta;
  u.cost += model.price_in * static_cast<double>(n_in) + model.price_out * static_cast<double>(n_out);
  ++u.calls;
  if (estimated) ++u.estimated_calls;
  total_ += delta;
  return delta;
}

double TokenLedger::relative_total() const {
  std::lock_guard lock(mu_);
  return total_;
}

std::map<std::string, ModelUsage> TokenLedger::usage() const {
  std::lock_guard lock(mu_);
  return usage_;
}

int TokenLedger::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

json TokenLedger::snapshot() const {
  std::lock_guard lock(mu_);
  json models = json::object();
  for (const auto& [name, u] : usage_) {
    models[name] = {{"n_in", u.n_in},   {"n_out", u.n_out},         {"relative", u.relative},
                    {"cost", u.cost},   {"calls", u.calls},         {"estimated_calls", u.estimated_calls}};
  }
  return {{"formula", to_string(formula_)}, {"relative_total", total_}, {"models", models}};
}

TokenLedger::Reservation::~Reservation() {
  if (ledger_ == nullptr) return;
  std::lock_guard lock(ledger_->mu_);
  --ledger_->in_flight_;
}

std::optional<TokenLedger::Reservation> TokenLedger::try_admit(double budget) {
  std::lock_guard lock(mu_);
  if (total_ >= budget) return std::nullopt;
  ++in_flight_;
  return Reservation(this);
}

std::uint64_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

ScriptedProvider::ScriptedProvider(std::vector<Reply> replies) : replies_(std::move(replies)) {
  if (replies_.empty()) throw ConfigError("scripted provider needs at least one reply");
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scripted replies " + path);
  std::vector<Reply> replies;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Reply r;
      r.text = j.at("text").get<std::string>();
      if (j.contains("n_I") && !j["n_I"].is_null()) r.n_in = j["n_I"].get<std::uint64_t>();
      if (j.contains("n_O") && !j["n_O"].is_null()) r.n_out = j["n_O"].get<std::uint64_t>();
      replies.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return std::make_shared<ScriptedProvider>(std::move(replies));
}

Completion ScriptedProvider::complete(const specfmt::PromptBundle& bundle, const ModelConfig& model) {
  Reply reply;
  {
    std::lock_guard lock(mu_);
    reply = replies_[next_ % replies_.size()];
    ++next_;
  }
  Completion c;
  c.text = reply.text;
  c.model = model.name;
  c.estimated = !reply.n_in || !reply.n_out;
  c.n_in = reply.n_in.value_or(estimate_tokens(bundle.system_prompt) + estimate_tokens(bundle.user_prompt));
  c.n_out = reply.n_out.value_or(estimate_tokens(reply.text));
  c.attempts.push_back({200, {}, 0.0});
  return c;
}

std::size_t ScriptedProvider::served() const {
  std::lock_guard lock(mu_);
  return next_;
}

const ModelConfig& pick_model(const std::vector<ModelConfig>& configs, std::mt19937_64& rng) {
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& m : configs) {
    weights.push_back(m.weight);
    total += m.weight;
  }
  if (configs.empty() || !(total > 0.0)) throw ConfigError("no model has a positive weight");
  if (configs.size() == 1) return configs.front();
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return configs[dist(rng)];
}

Gateway::Gateway(std::vector<ModelConfig> models, std::shared_ptr<ChatProvider> provider,
                 TokenLedger& ledger)
    : models_(std::move(models)), provider_(std::move(provider)), ledger_(ledger) {
  if (models_.empty()) throw ConfigError("gateway needs at least one model");
  for (const auto& m : models_) m.validate();
  if (!provider_) throw ConfigError("gateway needs a provider");
}

Gateway::Result Gateway::complete(const specfmt::PromptBundle& bundle, std::mt19937_64& rng) {
  const ModelConfig& model = pick_model(models_, rng);
  Result r;
  const auto start = std::chrono::steady_clock::now();
  r.completion = provider_->complete(bundle, model);
  if (r.completion.latency_s == 0.0) {
    r.completion.latency_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  r.delta = ledger_.record(model, r.completion.n_in, r.completion.n_out, r.completion.estimated);
  return r;
}

}  // namespace funsearch::llm
