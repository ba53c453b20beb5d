#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "funsearch/errors.hpp"
#include "funsearch/eval_pool.hpp"
#include "funsearch/subprocess.hpp"

namespace funsearch::eval {

namespace fs = std::filesystem;
using nlohmann::json;

struct SandboxBackend::Worker {
  std::unique_ptr<Subprocess> process;
  fs::path workdir;
  long cpu_seconds = 0;
  std::size_t mem_bytes = 0;

  ~Worker() {
    process.reset();
    std::error_code ec;
    if (!workdir.empty()) fs::remove_all(workdir, ec);
  }
};

namespace {

// Python's json module emits NaN/Infinity literals, which are not JSON.
// They are mapped to null so the score check reports invalid-score.
std::string sanitize_nonfinite(const std::string& line) {
  std::string out;
  out.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      out += c;
      if (c == '\\' && i + 1 < line.size()) {
        out += line[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out += c;
      continue;
    }
    auto starts = [&](std::string_view word) { return line.compare(i, word.size(), word) == 0; };
    if (starts("NaN")) {
      out += "null";
      i += 2;
    } else if (starts("-Infinity")) {
      out += "null";
      i += 8;
    } else if (starts("Infinity")) {
      out += "null";
      i += 7;
    } else {
      out += c;
    }
  }
  return out;
}

FailureKind classify_error(const std::string& error) {
  std::string lower = error;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower.find("timeout") != std::string::npos || lower.find("timed out") != std::string::npos ||
      lower.find("cpu time") != std::string::npos) {
    return FailureKind::timeout;
  }
  return FailureKind::crash;
}

fs::path make_workdir(const std::string& root) {
  fs::path base = root.empty() ? fs::temp_directory_path() : fs::path(root);
  std::error_code ec;
  fs::create_directories(base, ec);
  std::string templ = (base / "funsearch-worker-XXXXXX").string();
  if (::mkdtemp(templ.data()) == nullptr) {
    throw EvaluationError("cannot create worker directory under " + base.string());
  }
  return templ;
}

}  // namespace

SandboxBackend::SandboxBackend(Options options) : options_(std::move(options)) {
  if (options_.command.empty()) throw ConfigError("sandbox backend needs a worker command");
  if (options_.grace_s < 0) throw ConfigError("sandbox grace period must be >= 0");
}

SandboxBackend::~SandboxBackend() {
  cancel_all();
  std::lock_guard lock(mu_);
  idle_.clear();
}

json SandboxBackend::request_json(const EvalRequest& request) {
  json j;
  j["id"] = request.id;
  j["program"] = request.candidate.source;
  j["entry"] = request.entry;
  j["inputs"] = request.inputs;
  j["timeout_s"] = request.timeout_s;
  return j;
}

EvalResult SandboxBackend::parse_response(const EvalRequest& request, const std::string& line) {
  const std::size_t n_inputs = request.inputs.size();
  json j;
  try {
    j = json::parse(sanitize_nonfinite(line));
  } catch (const json::parse_error&) {
    return EvalResult::failed(request.id, n_inputs, FailureKind::crash, "malformed worker response");
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("ok") ||
      !j["ok"].is_boolean()) {
    return EvalResult::failed(request.id, n_inputs, FailureKind::crash, "worker response missing id/ok");
  }
  const std::string tail = j.contains("stderr_tail") && j["stderr_tail"].is_string()
                               ? j["stderr_tail"].get<std::string>()
                               : std::string();
  if (j["id"].get<std::string>() != request.id) {
    auto r = EvalResult::failed(request.id, n_inputs, FailureKind::crash,
                                "worker answered id '" + j["id"].get<std::string>() + "'");
    r.stderr_tail = tail;
    return r;
  }
  if (!j["ok"].get<bool>()) {
    const std::string error =
        j.contains("error") && j["error"].is_string() ? j["error"].get<std::string>() : "candidate failed";
    auto r = EvalResult::failed(request.id, n_inputs, classify_error(error), error);
    r.stderr_tail = tail;
    return r;
  }
  if (!j.contains("results") || !j["results"].is_array() || j["results"].size() != n_inputs) {
    auto r = EvalResult::failed(request.id, n_inputs, FailureKind::crash,
                                "worker returned wrong number of results");
    r.stderr_tail = tail;
    return r;
  }
  EvalResult r;
  r.request_id = request.id;
  r.stderr_tail = tail;
  r.verified = true;
  for (const auto& item : j["results"]) {
    InputOutcome o;
    if (!item.is_object()) {
      o.failure = FailureKind::crash;
      o.message = "result entry is not an object";
    } else if (!item.contains("score") || !item["score"].is_number()) {
      o.failure = FailureKind::invalid_score;
      o.message = "score is not a finite number";
      o.score = std::nan("");
    } else {
      o.score = item["score"].get<double>();
      if (item.contains("construction") && item["construction"].is_object()) {
        o.construction = item["construction"];
      }
    }
    r.outcomes.push_back(std::move(o));
  }
  return r;
}

std::unique_ptr<SandboxBackend::Worker> SandboxBackend::acquire(const EvalRequest& request) {
  const long cpu = std::max(1L, static_cast<long>(std::ceil(request.timeout_s)));
  auto worker = std::unique_ptr<Worker>();
  {
    std::lock_guard lock(mu_);
    for (auto it = idle_.begin(); it != idle_.end(); ++it) {
      if ((*it)->cpu_seconds == cpu && (*it)->mem_bytes == request.mem_bytes && (*it)->process->running()) {
        worker = std::move(*it);
        idle_.erase(it);
        break;
      }
    }
  }
  if (!worker) {
    worker = std::make_unique<Worker>();
    worker->workdir = make_workdir(options_.workdir_root);
    worker->cpu_seconds = cpu;
    worker->mem_bytes = request.mem_bytes;
    Subprocess::Options opts;
    opts.argv = options_.command;
    opts.argv.insert(opts.argv.end(), {"--cpu-seconds", std::to_string(cpu), "--mem-bytes",
                                       std::to_string(request.mem_bytes), "--workdir",
                                       worker->workdir.string()});
    opts.working_dir = worker->workdir.string();
    worker->process = std::make_unique<Subprocess>(opts);
  }
  std::lock_guard lock(mu_);
  busy_.push_back(worker.get());
  return worker;
}

void SandboxBackend::release(std::unique_ptr<Worker> worker) {
  std::lock_guard lock(mu_);
  busy_.erase(std::remove(busy_.begin(), busy_.end(), worker.get()), busy_.end());
  if (options_.warm_reuse && worker->process->running()) idle_.push_back(std::move(worker));
}

EvalResult SandboxBackend::evaluate(const EvalRequest& request) {
  request.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n_inputs = request.inputs.size();
  std::unique_ptr<Worker> worker;
  try {
    worker = acquire(request);
  } catch (const Error& e) {
    return EvalResult::failed(request.id, n_inputs, FailureKind::crash, e.what());
  }
  auto finish = [&](EvalResult r, bool keep) {
    if (!keep) worker->process->kill();
    r.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    release(std::move(worker));
    return r;
  };

  if (!worker->process->write_line(request_json(request).dump())) {
    auto r = EvalResult::failed(request.id, n_inputs, FailureKind::crash, "worker closed its input");
    r.stderr_tail = worker->process->stderr_tail();
    return finish(std::move(r), false);
  }
  const auto budget = std::chrono::duration<double>(request.timeout_s * static_cast<double>(n_inputs) +
                                                    options_.grace_s);
  const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(budget);
  std::string line;
  switch (worker->process->read_line(line, deadline)) {
    case Subprocess::ReadStatus::timeout: {
      worker->process->kill();
      auto r = EvalResult::failed(request.id, n_inputs, FailureKind::timeout,
                                  "no response within " + std::to_string(budget.count()) + " s");
      r.stderr_tail = worker->process->stderr_tail();
      return finish(std::move(r), false);
    }
    case Subprocess::ReadStatus::closed: {
      auto r = EvalResult::failed(request.id, n_inputs, FailureKind::crash, "worker exited without a response");
      r.stderr_tail = worker->process->stderr_tail();
      return finish(std::move(r), false);
    }
    case Subprocess::ReadStatus::ok:
      break;
  }
  EvalResult r = parse_response(request, line);
  if (r.stderr_tail.empty()) r.stderr_tail = worker->process->stderr_tail();
  return finish(std::move(r), options_.warm_reuse);
}

void SandboxBackend::cancel_all() {
  std::lock_guard lock(mu_);
  for (auto* w : busy_) w->process->kill();
  idle_.clear();
}

}  // namespace funsearch::eval
