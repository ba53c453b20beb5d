#include "funsearch/eval_pool.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "funsearch/errors.hpp"
#include "funsearch/hashing.hpp"

namespace funsearch::eval {

using nlohmann::json;

void EvalRequest::validate() const {
  if (!inputs.is_array() || inputs.empty()) throw ValidationError("evaluation request needs inputs");
  if (!(timeout_s > 0.0)) throw ValidationError("evaluation timeout must be > 0");
}

std::string to_string(FailureKind f) {
  switch (f) {
    case FailureKind::none: return "none";
    case FailureKind::timeout: return "timeout";
    case FailureKind::crash: return "crash";
    case FailureKind::invalid_score: return "invalid-score";
  }
  return "none";
}

bool EvalResult::ok() const {
  if (outcomes.empty()) return false;
  for (const auto& o : outcomes) {
    if (!o.ok()) return false;
  }
  return true;
}

FailureKind EvalResult::failure() const {
  for (const auto& o : outcomes) {
    if (!o.ok()) return o.failure;
  }
  return outcomes.empty() ? FailureKind::crash : FailureKind::none;
}

std::string EvalResult::failure_message() const {
  for (const auto& o : outcomes) {
    if (!o.ok()) return o.message;
  }
  return outcomes.empty() ? "no outcomes" : "";
}

double EvalResult::aggregate() const {
  double sum = 0.0;
  for (const auto& o : outcomes) sum += o.score;
  return sum;
}

std::vector<double> EvalResult::scores() const {
  std::vector<double> out;
  for (const auto& o : outcomes) out.push_back(o.score);
  return out;
}

EvalResult EvalResult::failed(const std::string& id, std::size_t inputs, FailureKind kind,
                              const std::string& message) {
  EvalResult r;
  r.request_id = id;
  r.outcomes.assign(std::max<std::size_t>(inputs, 1), InputOutcome{0.0, std::nullopt, kind, message});
  return r;
}

FailureKind parse_failure(const std::string& s) {
  if (s == "timeout") return FailureKind::timeout;
  if (s == "crash") return FailureKind::crash;
  if (s == "invalid-score" || s == "invalid_score") return FailureKind::invalid_score;
  if (s.empty() || s == "none") return FailureKind::none;
  throw ConfigError("unknown failure kind '" + s + "'");
}

FakeBackend::FakeBackend(std::vector<Entry> entries, std::optional<Entry> fallback)
    : entries_(std::move(entries)), fallback_(std::move(fallback)) {}

std::shared_ptr<FakeBackend> FakeBackend::from_json(const json& table) {
  auto parse_entry = [](const json& j) {
    Entry e;
    if (j.contains("code_hash")) e.code_hash = j["code_hash"].get<std::string>();
    if (j.contains("contains")) e.contains = j["contains"].get<std::string>();
    e.scores = j.value("scores", std::vector<double>{});
    if (j.contains("constructions")) {
      for (const auto& c : j["constructions"]) {
        e.constructions.push_back(c.is_null() ? std::nullopt : std::optional<json>(c));
      }
    }
    e.verified = j.value("verified", true);
    e.failure = parse_failure(j.value("failure", std::string()));
    e.delay_ms = j.value("delay_ms", 0);
    e.spin_ms = j.value("spin_ms", 0);
    return e;
  };
  try {
    std::vector<Entry> entries;
    std::optional<Entry> fallback;
    const json& list = table.is_array() ? table : table.at("entries");
    for (const auto& j : list) entries.push_back(parse_entry(j));
    if (table.is_object() && table.contains("default")) fallback = parse_entry(table["default"]);
    return std::make_shared<FakeBackend>(std::move(entries), std::move(fallback));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed fake backend table: ") + e.what());
  }
}

std::shared_ptr<FakeBackend> FakeBackend::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fake backend table " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

const FakeBackend::Entry* FakeBackend::match(const specfmt::CandidateCode& code) const {
  const std::string hash = code_hash(code.priority_source);
  for (const auto& e : entries_) {
    if (e.code_hash && *e.code_hash == hash) return &e;
  }
  for (const auto& e : entries_) {
    if (e.contains && code.priority_source.find(*e.contains) != std::string::npos) return &e;
  }
  return fallback_ ? &*fallback_ : nullptr;
}

EvalResult FakeBackend::evaluate(const EvalRequest& request) {
  ++calls_;
  const auto start = std::chrono::steady_clock::now();
  const Entry* e = match(request.candidate);
  if (e == nullptr) {
    return EvalResult::failed(request.id, request.inputs.size(), FailureKind::crash,
                              "no canned result for code hash " +
                                  code_hash(request.candidate.priority_source));
  }
  if (e->delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(e->delay_ms));
  if (e->spin_ms > 0) {
    volatile double sink = 0.0;
    const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(e->spin_ms);
    while (std::chrono::steady_clock::now() < until) {
      for (int i = 0; i < 1000; ++i) sink = sink + std::sqrt(static_cast<double>(i));
    }
  }
  EvalResult r;
  if (e->failure != FailureKind::none) {
    r = EvalResult::failed(request.id, request.inputs.size(), e->failure, "canned failure");
  } else {
    r.request_id = request.id;
    for (std::size_t i = 0; i < request.inputs.size(); ++i) {
      InputOutcome o;
      o.score = e->scores.empty() ? 0.0 : e->scores[std::min(i, e->scores.size() - 1)];
      if (i < e->constructions.size()) o.construction = e->constructions[i];
      r.outcomes.push_back(std::move(o));
    }
    r.verified = e->verified;
  }
  r.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

bool verify_result(const EvalResult& result, ProblemKind problem, ScoreRule rule) {
  if (problem == ProblemKind::custom) return result.ok();
  if (!result.ok()) return false;
  for (const auto& o : result.outcomes) {
    if (!o.construction) return false;
    try {
      const auto record = construction_from_json(*o.construction);
      if (problem_of(record.value) != problem) return false;
      if (!verify_construction(record).valid) return false;
      const double expected = score_construction(record.value, rule);
      if (std::abs(expected - o.score) > 1e-9 * std::max(1.0, std::abs(expected))) return false;
    } catch (const Error&) {
      return false;
    }
  }
  return true;
}

EvalPool::EvalPool(std::shared_ptr<Backend> backend, int evaluators) : backend_(std::move(backend)) {
  if (!backend_) throw ConfigError("evaluation pool needs a backend");
  if (evaluators < 1) throw ConfigError("evaluation pool needs at least one evaluator");
  for (int i = 0; i < evaluators; ++i) threads_.emplace_back([this] { run(); });
}

EvalPool::~EvalPool() { shutdown(ShutdownMode::drain); }

std::future<EvalResult> EvalPool::submit(EvalRequest request) {
  auto promise = std::make_shared<std::promise<EvalResult>>();
  auto future = promise->get_future();
  submit(std::move(request), [promise](EvalResult r) { promise->set_value(std::move(r)); });
  return future;
}

void EvalPool::submit(EvalRequest request, std::function<void(EvalResult)> on_done) {
  {
    std::lock_guard lock(mu_);
    if (!stopping_) {
      queue_.push_back({std::move(request), std::move(on_done)});
      cv_.notify_one();
      return;
    }
  }
  on_done(EvalResult::failed(request.id, request.inputs.size(), FailureKind::crash, "pool is shut down"));
}

std::size_t EvalPool::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

void EvalPool::shutdown(ShutdownMode mode) {
  std::deque<Job> dropped;
  {
    std::lock_guard lock(mu_);
    if (stopping_ && threads_.empty()) return;
    stopping_ = true;
    if (mode == ShutdownMode::kill) {
      killing_ = true;
      dropped.swap(queue_);
    }
  }
  cv_.notify_all();
  if (mode == ShutdownMode::kill) backend_->cancel_all();
  for (auto& job : dropped) {
    job.done(EvalResult::failed(job.request.id, job.request.inputs.size(), FailureKind::crash,
                                "pool shut down before evaluation"));
  }
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
}

void EvalPool::run() {
  for (;;) {
    Job job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = std::move(queue_.front());
      queue_.pop_front();
    }
    EvalResult result = process(job.request);
    job.done(std::move(result));
  }
}

EvalResult EvalPool::process(const EvalRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  EvalResult r;
  try {
    request.validate();
    r = backend_->evaluate(request);
  } catch (const std::exception& e) {
    r = EvalResult::failed(request.id, request.inputs.is_array() ? request.inputs.size() : 1,
                           FailureKind::crash, std::string("backend error: ") + e.what());
  }
  r.request_id = request.id;
  for (auto& o : r.outcomes) {
    if (o.ok() && !std::isfinite(o.score)) {
      o.failure = FailureKind::invalid_score;
      o.message = "non-finite score";
    }
  }
  if (!r.ok()) {
    r.verified = false;
  } else if (request.problem != ProblemKind::custom) {
    bool any_construction = false;
    for (const auto& o : r.outcomes) any_construction = any_construction || o.construction.has_value();
    if (backend_->requires_constructions()) {
      r.verified = verify_result(r, request.problem, request.score_rule);
    } else if (any_construction) {
      r.verified = r.verified && verify_result(r, request.problem, request.score_rule);
    }
  } else {
    r.verified = true;
  }
  if (r.duration_s == 0.0) {
    r.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return r;
}

}  // namespace funsearch::eval
