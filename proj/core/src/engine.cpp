#include "funsearch/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "funsearch/errors.hpp"
#include "funsearch/hashing.hpp"

namespace funsearch::engine {

using nlohmann::json;

ResetInterval ResetInterval::parse(const std::string& text) {
  if (text == "short") return {Unit::minutes, 15.0};
  if (text == "long") return {Unit::minutes, 60.0};
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("reset interval must be tokens:N or minutes:N");
  const std::string unit = text.substr(0, colon);
  ResetInterval r;
  if (unit == "tokens") {
    r.unit = Unit::tokens;
  } else if (unit == "minutes") {
    r.unit = Unit::minutes;
  } else {
    throw ConfigError("unknown reset interval unit '" + unit + "'");
  }
  try {
    std::size_t used = 0;
    r.amount = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("bad reset interval amount in '" + text + "'");
  }
  if (!(r.amount > 0) || !std::isfinite(r.amount)) throw ConfigError("reset interval must be positive");
  return r;
}

std::string ResetInterval::to_string() const {
  const std::string prefix = unit == Unit::tokens ? "tokens:" : "minutes:";
  if (amount == std::floor(amount) && std::abs(amount) < 1e15) {
    return prefix + std::to_string(static_cast<long long>(amount));
  }
  return prefix + json(amount).dump();
}

void EngineConfig::validate() const {
  if (island_count < 2) throw ConfigError("island_count must be >= 2");
  if (prompt_programs < 1) throw ConfigError("prompt_programs must be >= 1");
  if (samplers < 1) throw ConfigError("samplers must be >= 1");
  if (evaluators < 1) throw ConfigError("evaluators must be >= 1");
  if (!(temperature > 0) || !std::isfinite(temperature)) throw ConfigError("temperature must be > 0");
  if (!(budget >= 0) || !std::isfinite(budget)) throw ConfigError("budget must be a finite value >= 0");
  if (!(reset_interval.amount > 0)) throw ConfigError("reset interval must be positive");
}

EngineConfig EngineConfig::from_json(const json& j, EngineConfig c) {
  try {
    c.island_count = j.value("island_count", c.island_count);
    c.prompt_programs = j.value("prompt_programs", c.prompt_programs);
    c.samplers = j.value("samplers", c.samplers);
    c.evaluators = j.value("evaluators", c.evaluators);
    c.temperature = j.value("temperature", c.temperature);
    c.budget = j.value("budget", c.budget);
    c.seed = j.value("seed", c.seed);
    if (j.contains("reset_interval")) c.reset_interval = ResetInterval::parse(j["reset_interval"].get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("engine config: ") + e.what());
  }
  return c;
}

EngineConfig EngineConfig::from_json(const json& j) { return from_json(j, EngineConfig{}); }

json EngineConfig::to_json() const {
  return {{"island_count", island_count}, {"prompt_programs", prompt_programs},
          {"samplers", samplers},         {"evaluators", evaluators},
          {"reset_interval", reset_interval.to_string()},
          {"temperature", temperature},   {"budget", budget},
          {"seed", seed}};
}

std::string to_string(RegisterOutcome o) { return o == RegisterOutcome::stored ? "stored" : "duplicate"; }

std::string to_string(HaltReason r) {
  switch (r) {
    case HaltReason::budget: return "budget";
    case HaltReason::stop: return "stop";
    case HaltReason::gateway_error: return "gateway_error";
    case HaltReason::error: return "error";
  }
  return "error";
}

namespace {

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

void require_finite(const std::vector<double>& scores) {
  if (scores.empty()) throw ValidationError("program has no scores");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("non-finite score rejected");
  }
}

}  // namespace

ProgramDatabase::ProgramDatabase(int island_count) {
  if (island_count < 1) throw ValidationError("database needs at least one island");
  islands_.resize(static_cast<std::size_t>(island_count));
  for (int i = 0; i < island_count; ++i) islands_[static_cast<std::size_t>(i)].id = i;
}

std::string ProgramDatabase::add(int island, CandidateProgram program, std::uint64_t at) {
  program.id = "p" + std::to_string(next_id_++);
  program.island_id = island;
  program.registered_at = at;
  Island& isl = islands_[static_cast<std::size_t>(island)];
  isl.members.push_back(program.id);
  if (program.aggregate_score > isl.best_score) {
    isl.best_score = program.aggregate_score;
    isl.best_program_id = program.id;
    isl.last_improvement = at;
  }
  if (best_id_.empty() || program.aggregate_score > programs_.at(best_id_).aggregate_score) {
    best_id_ = program.id;
  }
  const std::string id = program.id;
  programs_.emplace(id, std::move(program));
  return id;
}

std::vector<std::string> ProgramDatabase::seed(const specfmt::CandidateCode& code, std::vector<double> scores,
                                               std::uint64_t at,
                                               std::vector<std::optional<json>> constructions) {
  if (seeded_) throw ValidationError("database is already seeded");
  require_finite(scores);
  CandidateProgram proto;
  proto.code = code;
  proto.hash = code_hash(code.priority_source);
  proto.aggregate_score = sum(scores);
  proto.per_input_scores = std::move(scores);
  proto.constructions = std::move(constructions);
  std::vector<std::string> ids;
  for (int i = 0; i < island_count(); ++i) ids.push_back(add(i, proto, at));
  seeded_ = true;
  return ids;
}

RegisterOutcome ProgramDatabase::register_program(int island, const specfmt::CandidateCode& code,
                                                  std::vector<double> scores, std::uint64_t at,
                                                  std::vector<std::optional<json>> constructions,
                                                  std::string* id_out) {
  if (island < 0 || island >= island_count()) throw ValidationError("invalid island id");
  require_finite(scores);
  const std::string hash = code_hash(code.priority_source);
  for (const auto& id : islands_[static_cast<std::size_t>(island)].members) {
    if (programs_.at(id).hash == hash) {
      if (id_out) id_out->clear();
      return RegisterOutcome::duplicate;
    }
  }
  CandidateProgram p;
  p.code = code;
  p.hash = hash;
  p.aggregate_score = sum(scores);
  p.per_input_scores = std::move(scores);
  p.constructions = std::move(constructions);
  const std::string id = add(island, std::move(p), at);
  if (id_out) *id_out = id;
  return RegisterOutcome::stored;
}

std::vector<double> ProgramDatabase::selection_weights(int island, double temperature) const {
  const Island& isl = this->island(island);
  std::vector<double> scores;
  for (const auto& id : isl.members) scores.push_back(programs_.at(id).aggregate_score);
  std::vector<double> weights;
  if (scores.empty()) return weights;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double scale = temperature * std::max(1.0, *hi - *lo);
  for (double s : scores) weights.push_back(std::exp((s - *hi) / scale));
  return weights;
}

PromptSample ProgramDatabase::sample_for_prompt(std::mt19937_64& rng, int max_programs,
                                                double temperature) const {
  if (!seeded_) throw ValidationError("database is not seeded");
  PromptSample out;
  out.island = std::uniform_int_distribution<int>(0, island_count() - 1)(rng);
  const Island& isl = islands_[static_cast<std::size_t>(out.island)];
  if (isl.members.size() <= static_cast<std::size_t>(max_programs)) {
    for (const auto& id : isl.members) out.programs.push_back(programs_.at(id));
    return out;
  }
  std::vector<double> weights = selection_weights(out.island, temperature);
  std::vector<std::string> ids = isl.members;
  for (int k = 0; k < max_programs; ++k) {
    const double total = sum(weights);
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t pick = weights.size() - 1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (u < weights[i]) {
        pick = i;
        break;
      }
      u -= weights[i];
    }
    out.programs.push_back(programs_.at(ids[pick]));
    weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(pick));
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

ResetPlan ProgramDatabase::plan_reset(std::mt19937_64& rng) const {
  if (island_count() < 2) throw ValidationError("island reset needs at least two islands");
  std::vector<int> order(islands_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const Island& x = islands_[static_cast<std::size_t>(a)];
    const Island& y = islands_[static_cast<std::size_t>(b)];
    if (x.best_score != y.best_score) return x.best_score < y.best_score;
    if (x.last_improvement != y.last_improvement) return x.last_improvement < y.last_improvement;
    return x.id > y.id;
  });
  // The island holding the global best is never discarded, even when ties
  // would rank it among the lowest.
  const int keep = best_island();
  const std::size_t n_reset = islands_.size() / 2;
  ResetPlan plan;
  std::vector<int> survivors;
  for (int id : order) {
    if (id != keep && plan.targets.size() < n_reset) {
      plan.targets.push_back(id);
    } else {
      survivors.push_back(id);
    }
  }
  std::sort(survivors.begin(), survivors.end());
  std::uniform_int_distribution<std::size_t> pick(0, survivors.size() - 1);
  for (std::size_t i = 0; i < plan.targets.size(); ++i) plan.sources.push_back(survivors[pick(rng)]);
  return plan;
}

ResetReport ProgramDatabase::apply_reset(const ResetPlan& plan, std::uint64_t at) {
  if (plan.targets.size() != plan.sources.size()) throw ValidationError("malformed reset plan");
  for (int t : plan.targets) {
    if (t < 0 || t >= island_count()) throw ValidationError("invalid island id in reset plan");
    if (std::find(plan.sources.begin(), plan.sources.end(), t) != plan.sources.end()) {
      throw ValidationError("reset plan refills an island from a discarded island");
    }
    if (t == best_island()) throw ValidationError("reset plan discards the global best island");
  }
  ResetReport report;
  report.plan = plan;
  for (int t : plan.targets) {
    Island& isl = islands_[static_cast<std::size_t>(t)];
    for (const auto& id : isl.members) programs_.erase(id);
    isl.members.clear();
    isl.best_score = -std::numeric_limits<double>::infinity();
    isl.best_program_id.clear();
  }
  for (std::size_t i = 0; i < plan.targets.size(); ++i) {
    const Island& src = islands_[static_cast<std::size_t>(plan.sources[i])];
    if (src.best_program_id.empty()) throw ValidationError("reset source island is empty");
    CandidateProgram copy = programs_.at(src.best_program_id);
    const std::uint64_t inherited = src.last_improvement;
    report.copies.push_back(add(plan.targets[i], std::move(copy), at));
    islands_[static_cast<std::size_t>(plan.targets[i])].last_improvement = inherited;
  }
  return report;
}

ResetReport ProgramDatabase::island_reset(std::mt19937_64& rng, std::uint64_t at) {
  return apply_reset(plan_reset(rng), at);
}

const Island& ProgramDatabase::island(int id) const {
  if (id < 0 || id >= island_count()) throw ValidationError("invalid island id");
  return islands_[static_cast<std::size_t>(id)];
}

const CandidateProgram& ProgramDatabase::program(const std::string& id) const {
  auto it = programs_.find(id);
  if (it == programs_.end()) throw ValidationError("unknown program id '" + id + "'");
  return it->second;
}

const CandidateProgram* ProgramDatabase::best() const {
  return best_id_.empty() ? nullptr : &programs_.at(best_id_);
}

int ProgramDatabase::best_island() const { return best_id_.empty() ? -1 : programs_.at(best_id_).island_id; }

std::vector<std::vector<std::string>> ProgramDatabase::membership() const {
  std::vector<std::vector<std::string>> out;
  for (const auto& isl : islands_) out.push_back(isl.members);
  return out;
}

bool ProgramDatabase::check_invariants() const {
  double global = -std::numeric_limits<double>::infinity();
  for (const auto& isl : islands_) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& id : isl.members) {
      auto it = programs_.find(id);
      if (it == programs_.end() || it->second.island_id != isl.id) return false;
      best = std::max(best, it->second.aggregate_score);
    }
    if (best != isl.best_score) return false;
    if (isl.members.empty() != isl.best_program_id.empty()) return false;
    if (!isl.members.empty() && programs_.at(isl.best_program_id).aggregate_score != best) return false;
    global = std::max(global, best);
  }
  if (best_id_.empty()) return !seeded_;
  auto it = programs_.find(best_id_);
  if (it == programs_.end()) return false;
  const auto& members = islands_[static_cast<std::size_t>(it->second.island_id)].members;
  if (std::find(members.begin(), members.end(), best_id_) == members.end()) return false;
  return it->second.aggregate_score == global;
}

ProgramDatabase ProgramDatabase::replay(int island_count, const std::vector<json>& events) {
  ProgramDatabase db(island_count);
  auto expect_id = [](const std::string& got, const json& want) {
    if (got != want.get<std::string>()) throw FormatError("ledger replay diverged at program " + got);
  };
  try {
    for (const auto& e : events) {
      const std::string type = e.at("type").get<std::string>();
      if (type == "seed") {
        CandidateProgram proto;
        proto.hash = e.at("hash").get<std::string>();
        proto.per_input_scores = e.at("scores").get<std::vector<double>>();
        proto.aggregate_score = sum(proto.per_input_scores);
        const auto at = e.at("at").get<std::uint64_t>();
        const auto& ids = e.at("ids");
        if (db.seeded_ || ids.size() != static_cast<std::size_t>(island_count)) {
          throw FormatError("seed event does not match the island count");
        }
        for (int i = 0; i < island_count; ++i) expect_id(db.add(i, proto, at), ids[static_cast<std::size_t>(i)]);
        db.seeded_ = true;
      } else if (type == "register" && e.at("outcome") == "stored") {
        CandidateProgram p;
        p.hash = e.at("hash").get<std::string>();
        p.per_input_scores = e.at("scores").get<std::vector<double>>();
        p.aggregate_score = sum(p.per_input_scores);
        expect_id(db.add(e.at("island").get<int>(), std::move(p), e.at("at").get<std::uint64_t>()), e.at("id"));
      } else if (type == "reset") {
        ResetPlan plan{e.at("targets").get<std::vector<int>>(), e.at("sources").get<std::vector<int>>()};
        const auto report = db.apply_reset(plan, e.at("at").get<std::uint64_t>());
        const auto& copies = e.at("copies");
        for (std::size_t i = 0; i < report.copies.size(); ++i) expect_id(report.copies[i], copies.at(i));
      }
    }
  } catch (const json::exception& ex) {
    throw FormatError(std::string("malformed ledger event: ") + ex.what());
  }
  return db;
}

json RunReport::to_json() const {
  json j;
  j["best_score"] = best_score;
  j["seed_score"] = seed_score;
  if (best) {
    json b;
    b["id"] = best->id;
    b["island"] = best->island_id;
    b["hash"] = best->hash;
    b["scores"] = best->per_input_scores;
    b["priority_source"] = best->code.priority_source;
    b["origin"] = specfmt::to_string(best->code.origin);
    b["model"] = best->code.model;
    json cons = json::array();
    for (const auto& c : best->constructions) cons.push_back(c ? *c : json(nullptr));
    b["constructions"] = cons;
    j["best"] = b;
  } else {
    j["best"] = nullptr;
  }
  j["counts"] = {{"samples", counts.samples},
                 {"llm_responses", counts.llm_responses},
                 {"extraction_failures", counts.extraction_failures},
                 {"safety_rejections", counts.safety_rejections},
                 {"eval_failures", counts.eval_failures},
                 {"verification_failures", counts.verification_failures},
                 {"registered", counts.registered},
                 {"duplicates", counts.duplicates},
                 {"resets", counts.resets}};
  j["halt"] = engine::to_string(halt);
  j["error"] = error;
  j["partial"] = partial;
  j["relative_total"] = relative_total;
  j["token_usage"] = token_usage;
  json tr = json::array();
  for (const auto& p : trace) tr.push_back({p.relative_tokens, p.best});
  j["trace"] = tr;
  j["membership"] = membership;
  return j;
}

namespace {

class Loop {
 public:
  Loop(const EngineConfig& config, const RunOptions& options, const specfmt::ProblemSpec& spec,
       llm::Gateway& gateway, eval::EvalPool& pool, RunLedger& ledger)
      : config_(config),
        options_(options),
        spec_(spec),
        gateway_(gateway),
        pool_(pool),
        ledger_(gateway.ledger()),
        events_(ledger),
        db_(config.island_count),
        db_rng_(splitmix64(config.seed)),
        started_(std::chrono::steady_clock::now()) {}

  RunReport run() {
    seed();
    if (config_.reset_interval.unit == ResetInterval::Unit::tokens) {
      next_reset_ = config_.reset_interval.amount;
    } else {
      next_reset_ = config_.reset_interval.amount * 60.0;
    }
    if (options_.checkpoint_every > 0) {
      trace_.push_back({0.0, db_.best()->aggregate_score});
      next_checkpoint_ = options_.checkpoint_every;
    }
    if (ledger_.relative_total() >= config_.budget) {
      set_halt(HaltReason::budget, "");
    } else {
      std::vector<std::thread> threads;
      for (int i = 0; i < config_.samplers; ++i) {
        threads.emplace_back([this, i] { sampler(i); });
      }
      for (auto& t : threads) t.join();
    }
    return finish();
  }

 private:
  eval::EvalRequest request_for(const specfmt::CandidateCode& code, std::string id) const {
    eval::EvalRequest r;
    r.id = std::move(id);
    r.candidate = code;
    r.entry = options_.eval.entry;
    r.inputs = options_.eval.inputs;
    r.timeout_s = options_.eval.timeout_s;
    r.mem_bytes = options_.eval.mem_bytes;
    r.problem = options_.eval.problem;
    r.score_rule = options_.eval.score_rule;
    return r;
  }

  double total() const { return ledger_.relative_total(); }

  void seed() {
    const auto code = specfmt::assemble_candidate(spec_, spec_.evolve_target.text, specfmt::Origin::seed, {});
    const auto result = pool_.evaluate(request_for(code, "seed"));
    if (!result.ok()) {
      throw EvaluationError("seed program failed evaluation (" + eval::to_string(result.failure()) +
                            "): " + result.failure_message() +
                            (result.stderr_tail.empty() ? "" : "\n" + result.stderr_tail));
    }
    if (!result.verified) throw EvaluationError("seed program's constructions failed verification");
    std::vector<std::optional<json>> cons;
    for (const auto& o : result.outcomes) cons.push_back(o.construction);
    std::lock_guard lock(mu_);
    const std::uint64_t at = events_.counter();
    const auto ids = db_.seed(code, result.scores(), at, cons);
    seed_score_ = result.aggregate();
    events_.append("seed",
                   {{"ids", ids}, {"hash", code_hash(code.priority_source)}, {"scores", result.scores()},
                    {"aggregate", seed_score_}, {"at", at}},
                   total());
    events_.append("best_update", {{"id", db_.best()->id}, {"score", seed_score_}}, total());
  }

  void set_halt(HaltReason reason, const std::string& error) {
    std::lock_guard lock(halt_mu_);
    if (halted_) return;
    halted_ = true;
    halt_reason_ = reason;
    error_ = error;
  }

  bool halted() {
    if (options_.stop && options_.stop->load()) set_halt(HaltReason::stop, "");
    std::lock_guard lock(halt_mu_);
    return halted_;
  }

  // Caller holds mu_.
  void after_tokens() {
    const double now_total = total();
    while (options_.checkpoint_every > 0 && now_total >= next_checkpoint_) {
      trace_.push_back({next_checkpoint_, db_.best()->aggregate_score});
      next_checkpoint_ += options_.checkpoint_every;
    }
    double clock = now_total;
    if (config_.reset_interval.unit == ResetInterval::Unit::minutes) {
      clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    }
    if (clock < next_reset_) return;
    const double step = config_.reset_interval.unit == ResetInterval::Unit::tokens
                            ? config_.reset_interval.amount
                            : config_.reset_interval.amount * 60.0;
    while (next_reset_ <= clock) next_reset_ += step;
    const std::uint64_t at = events_.counter();
    const auto report = db_.island_reset(db_rng_, at);
    ++counts_.resets;
    events_.append("reset",
                   {{"targets", report.plan.targets}, {"sources", report.plan.sources},
                    {"copies", report.copies}, {"at", at}},
                   total());
  }

  void sampler(int index) {
    std::mt19937_64 rng(splitmix64(config_.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index + 1))));
    const std::string& target = spec_.evolve_target.name;
    while (!halted()) {
      try {
        auto admit = ledger_.try_admit(config_.budget);
        if (!admit) {
          set_halt(HaltReason::budget, "");
          break;
        }
        PromptSample sample;
        std::uint64_t iteration = 0;
        {
          std::lock_guard lock(mu_);
          sample = db_.sample_for_prompt(rng, config_.prompt_programs, config_.temperature);
          iteration = ++counts_.samples;
          std::vector<std::string> parents;
          for (const auto& p : sample.programs) parents.push_back(p.id);
          events_.append("sample", {{"iteration", iteration}, {"island", sample.island}, {"parents", parents}},
                         total());
        }
        std::vector<specfmt::PromptProgram> programs;
        std::vector<std::string> parents;
        for (const auto& p : sample.programs) {
          programs.push_back({p.id, p.code.priority_source, p.aggregate_score, p.registered_at});
          parents.push_back(p.id);
        }
        const auto bundle = specfmt::build_prompt(spec_, programs, static_cast<std::size_t>(config_.prompt_programs));

        llm::Gateway::Result reply;
        try {
          reply = gateway_.complete(bundle, rng);
        } catch (const GatewayError& e) {
          set_halt(HaltReason::gateway_error, e.what());
          break;
        }
        admit.reset();
        const auto& c = reply.completion;
        {
          std::lock_guard lock(mu_);
          ++counts_.llm_responses;
          events_.append("llm_response",
                         {{"iteration", iteration}, {"model", c.model}, {"n_in", c.n_in}, {"n_out", c.n_out},
                          {"delta", reply.delta}, {"estimated", c.estimated}, {"latency_s", c.latency_s}},
                         total());
          after_tokens();
        }

        auto fn = specfmt::extract_function(c.text, target, target);
        std::optional<specfmt::CandidateCode> code;
        std::string extraction_error = "no function definition found";
        if (fn) {
          try {
            code = specfmt::assemble_candidate(spec_, *fn, specfmt::Origin::model, parents, c.model);
          } catch (const FormatError& e) {
            extraction_error = e.what();
          }
        }
        if (!code) {
          std::lock_guard lock(mu_);
          ++counts_.extraction_failures;
          events_.append("extraction_fail", {{"iteration", iteration}, {"reason", extraction_error}}, total());
          continue;
        }
        if (auto v = safety::screen(code->priority_source, options_.safety)) {
          std::lock_guard lock(mu_);
          ++counts_.safety_rejections;
          events_.append("safety_reject", {{"iteration", iteration}, {"violation", v->describe()}}, total());
          continue;
        }

        const auto result = pool_.evaluate(request_for(*code, "c" + std::to_string(iteration)));
        std::lock_guard lock(mu_);
        events_.append("eval",
                       {{"iteration", iteration}, {"ok", result.ok()}, {"failure", eval::to_string(result.failure())},
                        {"message", result.failure_message()}, {"scores", result.scores()},
                        {"verified", result.verified}, {"duration_s", result.duration_s}},
                       total());
        if (!result.ok()) {
          ++counts_.eval_failures;
          continue;
        }
        if (!result.verified) {
          ++counts_.verification_failures;
          continue;
        }
        std::vector<std::optional<json>> cons;
        for (const auto& o : result.outcomes) cons.push_back(o.construction);
        const double previous_best = db_.best()->aggregate_score;
        const std::uint64_t at = events_.counter();
        std::string id;
        const auto outcome = db_.register_program(sample.island, *code, result.scores(), at, cons, &id);
        if (outcome == RegisterOutcome::stored) {
          ++counts_.registered;
        } else {
          ++counts_.duplicates;
        }
        events_.append("register",
                       {{"iteration", iteration}, {"island", sample.island}, {"id", id},
                        {"hash", code_hash(code->priority_source)}, {"scores", result.scores()},
                        {"aggregate", result.aggregate()}, {"outcome", to_string(outcome)}, {"at", at}},
                       total());
        if (db_.best()->aggregate_score > previous_best) {
          events_.append("best_update", {{"id", db_.best()->id}, {"score", db_.best()->aggregate_score}}, total());
        }
      } catch (const std::exception& e) {
        set_halt(HaltReason::error, e.what());
        break;
      }
    }
  }

  RunReport finish() {
    std::lock_guard lock(mu_);
    RunReport r;
    r.best = *db_.best();
    r.best_score = db_.best()->aggregate_score;
    r.seed_score = seed_score_;
    r.counts = counts_;
    r.halt = halt_reason_;
    r.error = error_;
    r.partial = halt_reason_ == HaltReason::gateway_error || halt_reason_ == HaltReason::error;
    r.relative_total = total();
    r.token_usage = ledger_.snapshot();
    r.membership = db_.membership();
    if (options_.checkpoint_every > 0) {
      while (r.relative_total >= next_checkpoint_) {
        trace_.push_back({next_checkpoint_, r.best_score});
        next_checkpoint_ += options_.checkpoint_every;
      }
      if (trace_.back().relative_tokens < r.relative_total) trace_.push_back({r.relative_total, r.best_score});
    }
    r.trace = trace_;
    events_.append("halt", {{"reason", to_string(halt_reason_)}, {"error", error_}, {"best_score", r.best_score}},
                   r.relative_total);
    return r;
  }

  const EngineConfig& config_;
  const RunOptions& options_;
  const specfmt::ProblemSpec& spec_;
  llm::Gateway& gateway_;
  eval::EvalPool& pool_;
  llm::TokenLedger& ledger_;
  RunLedger& events_;

  std::mutex mu_;
  ProgramDatabase db_;
  std::mt19937_64 db_rng_;
  RunCounts counts_;
  double seed_score_ = 0.0;
  std::vector<TracePoint> trace_;
  double next_checkpoint_ = 0.0;
  double next_reset_ = 0.0;
  std::chrono::steady_clock::time_point started_;

  std::mutex halt_mu_;
  bool halted_ = false;
  HaltReason halt_reason_ = HaltReason::budget;
  std::string error_;
};

}  // namespace

RunReport run_loop(const EngineConfig& config, const RunOptions& options, const specfmt::ProblemSpec& spec,
                   llm::Gateway& gateway, eval::EvalPool& pool, RunLedger& ledger) {
  config.validate();
  if (!options.eval.inputs.is_array() || options.eval.inputs.empty()) {
    throw ConfigError("run needs at least one evaluation input");
  }
  Loop loop(config, options, spec, gateway, pool, ledger);
  return loop.run();
}

}  // namespace funsearch::engine
