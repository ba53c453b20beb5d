#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <set>
#include <thread>

#include "funsearch/capset.hpp"
#include "funsearch/errors.hpp"
#include "funsearch/eval_pool.hpp"
#include "funsearch/hashing.hpp"
#include "funsearch/noiso.hpp"

using namespace funsearch;
using namespace funsearch::eval;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

EvalRequest request(const std::string& id, const std::string& program, json inputs = json::array({1}),
                    double timeout_s = 5.0) {
  EvalRequest r;
  r.id = id;
  r.candidate.source = program;
  r.candidate.priority_source = program;
  r.inputs = std::move(inputs);
  r.timeout_s = timeout_s;
  return r;
}

std::shared_ptr<SandboxBackend> sandbox(bool warm = false, double grace = 0.5) {
  SandboxBackend::Options o;
  o.command = {FUNSEARCH_FAKE_WORKER};
  o.grace_s = grace;
  o.warm_reuse = warm;
  return std::make_shared<SandboxBackend>(o);
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

}  // namespace

TEST_CASE("request validation") {
  CHECK_THROWS_AS(request("a", "x", json::array()).validate(), ValidationError);
  CHECK_THROWS_AS(request("a", "x", json::array({1}), 0.0).validate(), ValidationError);
  CHECK_NOTHROW(request("a", "x").validate());
  EvalPool pool(std::make_shared<FakeBackend>(std::vector<FakeBackend::Entry>{}), 1);
  const auto r = pool.evaluate(request("bad", "x", json::array()));
  CHECK(r.failure() == FailureKind::crash);
}

TEST_CASE("fake backend canned results") {
  const std::string code = "def priority(n):\n  return 7\n";
  const auto table = json::parse(R"({"entries":[{"code_hash":")" + code_hash(code) +
                                 R"(","scores":[7]},{"contains":"return 8","scores":[8],"verified":false},
                                  {"contains":"slow","scores":[1],"failure":"timeout"}]})");
  auto backend = FakeBackend::from_json(table);
  EvalPool pool(backend, 2);

  const auto seven = pool.evaluate(request("a", code));
  CHECK(seven.ok());
  CHECK(seven.aggregate() == 7.0);
  CHECK(seven.verified);

  auto capset_req = request("b", "def priority(n):\n  return 8\n");
  capset_req.problem = ProblemKind::capset;
  const auto eight = pool.evaluate(capset_req);
  CHECK(eight.aggregate() == 8.0);
  CHECK_FALSE(eight.verified);

  CHECK(pool.evaluate(request("c", "slow")).failure() == FailureKind::timeout);
  const auto missing = pool.evaluate(request("d", "nothing matches"));
  CHECK(missing.failure() == FailureKind::crash);
  CHECK(missing.failure_message().find("no canned result") != std::string::npos);

  const auto multi = pool.evaluate(request("e", code, json::array({1, 2, 3})));
  CHECK(multi.scores() == std::vector<double>{7, 7, 7});
  CHECK(backend->calls() == 5);
}

TEST_CASE("fake backend fallback entry") {
  auto backend = FakeBackend::from_json(json::parse(R"({"entries":[],"default":{"scores":[2,3]}})"));
  const auto r = backend->evaluate(request("a", "anything", json::array({1, 2})));
  CHECK(r.scores() == std::vector<double>{2, 3});
  CHECK_THROWS_AS(FakeBackend::from_json(json::parse(R"({"entries":[{"scores":"x"}]})")), ConfigError);
}

TEST_CASE("sandbox happy path and protocol fields") {
  EvalPool pool(sandbox(), 2);
  const auto r = pool.evaluate(request("ok", "#fw score_input\n", json::array({3, 4})));
  REQUIRE(r.ok());
  CHECK(r.scores() == std::vector<double>{3, 4});

  const auto j = SandboxBackend::request_json(request("x", "prog", json::array({5}), 2.5));
  CHECK(j["id"] == "x");
  CHECK(j["program"] == "prog");
  CHECK(j["entry"] == "evaluate");
  CHECK(j["inputs"] == json::array({5}));
  CHECK(j["timeout_s"] == 2.5);
  CHECK(j.size() == 5);
}

TEST_CASE("sandbox launch flags and working directory") {
  auto req = request("f", "#fw flags\n", json::array({1}), 2.2);
  req.mem_bytes = 123456789;
  const auto r = sandbox()->evaluate(req);
  REQUIRE(r.ok());
  const auto& c = *r.outcomes[0].construction;
  CHECK(c["flags"]["cpu-seconds"] == "3");
  CHECK(c["flags"]["mem-bytes"] == "123456789");
  const std::string workdir = c["flags"]["workdir"];
  CHECK(c["cwd"].get<std::string>() == workdir);
  CHECK(workdir.find("funsearch-worker-") != std::string::npos);
  // The scratch directory is removed with the worker.
  CHECK_FALSE(std::filesystem::exists(workdir));
}

TEST_CASE("sandbox hang becomes a timeout and the pool keeps working") {
  EvalPool pool(sandbox(false, 0.3), 1);
  const auto t0 = Clock::now();
  const auto r = pool.evaluate(request("h", "#fw hang\n", json::array({1}), 0.5));
  const double took = seconds_since(t0);
  CHECK(r.failure() == FailureKind::timeout);
  CHECK(took >= 0.7);
  CHECK(took < 3.0);
  CHECK(pool.evaluate(request("after", "#fw score 5\n")).aggregate() == 5.0);
}

TEST_CASE("sandbox failure classification") {
  auto b = sandbox();
  const auto nan = b->evaluate(request("n", "#fw nan\n"));
  CHECK(nan.failure() == FailureKind::invalid_score);

  const auto crash = b->evaluate(request("c", "#fw crash\n"));
  CHECK(crash.failure() == FailureKind::crash);
  CHECK(crash.stderr_tail.find("worker exploded") != std::string::npos);

  const auto raised = b->evaluate(request("r", "#fw raise\n"));
  CHECK(raised.failure() == FailureKind::crash);
  CHECK(raised.failure_message().find("ZeroDivisionError") != std::string::npos);

  const auto limit = b->evaluate(request("t", "#fw raise cpu time limit exceeded\n"));
  CHECK(limit.failure() == FailureKind::timeout);

  CHECK(b->evaluate(request("w", "#fw wrong_id\n")).failure() == FailureKind::crash);
  CHECK(b->evaluate(request("g", "#fw garbage\n")).failure() == FailureKind::crash);

  const auto err = b->evaluate(request("s", "#fw stderr careful now\n"));
  CHECK(err.ok());
  CHECK(err.stderr_tail.find("careful now") != std::string::npos);
}

TEST_CASE("response parsing") {
  const auto req = request("id1", "p", json::array({1, 2}));
  CHECK(SandboxBackend::parse_response(req, R"({"id":"id1","ok":true,"results":[{"score":1},{"score":2}]})").ok());
  CHECK(SandboxBackend::parse_response(req, R"({"id":"id1","ok":true,"results":[{"score":1}]})").failure() ==
        FailureKind::crash);
  CHECK(SandboxBackend::parse_response(req, R"({"id":"id1","ok":true,"results":[{"score":"x"},{"score":2}]})")
            .failure() == FailureKind::invalid_score);
  CHECK(SandboxBackend::parse_response(req, R"({"id":"id1","ok":true,"results":[{"score":NaN},{"score":2}]})")
            .failure() == FailureKind::invalid_score);
  CHECK(SandboxBackend::parse_response(req, R"({"id":"id1","ok":false,"error":"timed out"})").failure() ==
        FailureKind::timeout);
  CHECK(SandboxBackend::parse_response(req, "{").failure() == FailureKind::crash);
}

TEST_CASE("warm reuse keeps the worker process") {
  auto warm = sandbox(true);
  const auto a = warm->evaluate(request("a", "#fw pid\n"));
  const auto b = warm->evaluate(request("b", "#fw pid\n"));
  CHECK((*a.outcomes[0].construction)["pid"] == (*b.outcomes[0].construction)["pid"]);

  auto cold = sandbox(false);
  const auto c = cold->evaluate(request("c", "#fw pid\n"));
  const auto d = cold->evaluate(request("d", "#fw pid\n"));
  CHECK((*c.outcomes[0].construction)["pid"] != (*d.outcomes[0].construction)["pid"]);
}

TEST_CASE("verify_result checks constructions natively") {
  const auto caps = kernels::capset_greedy_solve(4, kernels::PriorityOracle::random(3));
  REQUIRE(kernels::verify_capset(caps));
  const double size = static_cast<double>(caps.size());

  auto make = [](double score, json construction) {
    EvalResult r;
    r.request_id = "v";
    InputOutcome o;
    o.score = score;
    o.construction = std::move(construction);
    r.outcomes.push_back(o);
    return r;
  };
  CHECK(verify_result(make(size, to_json(caps)), ProblemKind::capset, ScoreRule::size));
  CHECK_FALSE(verify_result(make(size + 2, to_json(caps)), ProblemKind::capset, ScoreRule::size));

  // (0,0), (1,1), (2,2) sum to zero in every coordinate.
  kernels::CapSetInstance bad{2, {{0, 0}, {1, 1}, {2, 2}}};
  CHECK_FALSE(verify_result(make(3, to_json(bad)), ProblemKind::capset, ScoreRule::size));

  EvalResult bare;
  bare.outcomes.push_back(InputOutcome{4.0, std::nullopt});
  CHECK_FALSE(verify_result(bare, ProblemKind::capset, ScoreRule::size));
  CHECK(verify_result(bare, ProblemKind::custom, ScoreRule::size));

  // A construction of the wrong problem fails.
  const auto grid = kernels::noiso_greedy_solve(4, kernels::PriorityOracle::l2_center());
  CHECK_FALSE(verify_result(make(static_cast<double>(grid.size()), to_json(grid)), ProblemKind::capset,
                            ScoreRule::size));
  CHECK(verify_result(make(-static_cast<double>(grid.size()), to_json(grid)), ProblemKind::noiso,
                      ScoreRule::neg_size));
  CHECK(verify_result(make(grid.size() / 4.0, to_json(grid)), ProblemKind::noiso, ScoreRule::size_over_n));
}

TEST_CASE("pool verification of sandbox constructions") {
  EvalPool pool(sandbox(), 2);
  auto honest = request("h", "#fw capset 5\n", json::array({3, 4}));
  honest.problem = ProblemKind::capset;
  const auto r = pool.evaluate(honest);
  REQUIRE(r.ok());
  CHECK(r.verified);

  auto liar = request("l", "#fw capset 5\n#fw lie 1\n", json::array({3, 4}));
  liar.problem = ProblemKind::capset;
  const auto l = pool.evaluate(liar);
  CHECK(l.ok());
  CHECK_FALSE(l.verified);

  auto grid = request("g", "#fw noiso 2\n", json::array({5}));
  grid.problem = ProblemKind::noiso;
  CHECK(pool.evaluate(grid).verified);

  auto none = request("n", "#fw score 3\n");
  none.problem = ProblemKind::capset;
  CHECK_FALSE(pool.evaluate(none).verified);
}

namespace {

// Randomly sleeps, throws or fails; used to check each submission resolves once.
class ChaosBackend : public Backend {
 public:
  EvalResult evaluate(const EvalRequest& req) override {
    const auto h = std::hash<std::string>{}(req.id);
    if (h % 7 == 0) throw std::runtime_error("chaos");
    if (h % 11 == 0) return EvalResult::failed(req.id, 1, FailureKind::timeout, "slow");
    if (h % 13 == 0) std::this_thread::sleep_for(std::chrono::microseconds(200));
    EvalResult r;
    r.request_id = req.id;
    r.outcomes.push_back(InputOutcome{static_cast<double>(h % 100), std::nullopt});
    return r;
  }
};

}  // namespace

TEST_CASE("every submission resolves exactly once") {
  for (ShutdownMode mode : {ShutdownMode::drain, ShutdownMode::kill}) {
    std::mutex mu;
    std::map<std::string, int> seen;
    std::atomic<int> failures{0};
    constexpr int kJobs = 10000;
    {
      EvalPool pool(std::make_shared<ChaosBackend>(), 8);
      for (int i = 0; i < kJobs; ++i) {
        pool.submit(request("j" + std::to_string(i), "x"), [&](EvalResult r) {
          if (!r.ok()) ++failures;
          std::lock_guard lock(mu);
          ++seen[r.request_id];
        });
        if (mode == ShutdownMode::kill && i == kJobs / 2) pool.shutdown(ShutdownMode::kill);
      }
      pool.shutdown(mode);
    }
    CHECK(seen.size() == static_cast<std::size_t>(kJobs));
    bool once = true;
    for (const auto& [id, n] : seen) once = once && n == 1;
    CHECK(once);
    CHECK(failures > 0);
  }
}

TEST_CASE("sandbox crash injection resolves exactly once") {
  EvalPool pool(sandbox(), 4);
  std::mt19937 rng(9);
  std::vector<std::future<EvalResult>> futures;
  std::vector<FailureKind> expected;
  for (int i = 0; i < 60; ++i) {
    const int pick = static_cast<int>(rng() % 3);
    const std::string prog = pick == 0 ? "#fw crash\n" : pick == 1 ? "#fw raise\n" : "#fw score 2\n";
    expected.push_back(pick == 2 ? FailureKind::none : FailureKind::crash);
    futures.push_back(pool.submit(request("s" + std::to_string(i), prog)));
  }
  for (std::size_t i = 0; i < futures.size(); ++i) {
    const auto r = futures[i].get();
    CHECK(r.request_id == "s" + std::to_string(i));
    CHECK(r.failure() == expected[i]);
  }
}

TEST_CASE("evaluator parallelism") {
  // CPU-bound candidates only show real speedup with enough cores; on
  // smaller machines the same check runs against sleeping candidates.
  const bool cpu_bound = std::thread::hardware_concurrency() >= 8;
  FakeBackend::Entry e;
  e.scores = {1};
  (cpu_bound ? e.spin_ms : e.delay_ms) = 50;
  auto timed = [&](int evaluators) {
    EvalPool pool(std::make_shared<FakeBackend>(std::vector<FakeBackend::Entry>{}, e), evaluators);
    const auto t0 = Clock::now();
    std::vector<std::future<EvalResult>> fs;
    for (int i = 0; i < 32; ++i) fs.push_back(pool.submit(request("p" + std::to_string(i), "x")));
    for (auto& f : fs) CHECK(f.get().ok());
    return seconds_since(t0);
  };
  const double one = timed(1);
  const double eight = timed(8);
  CHECK(one / eight >= 3.0);
}

TEST_CASE("shutdown modes") {
  FakeBackend::Entry slow;
  slow.scores = {1};
  slow.delay_ms = 20;
  {
    EvalPool pool(std::make_shared<FakeBackend>(std::vector<FakeBackend::Entry>{}, slow), 1);
    std::vector<std::future<EvalResult>> fs;
    for (int i = 0; i < 10; ++i) fs.push_back(pool.submit(request("d" + std::to_string(i), "x")));
    pool.shutdown(ShutdownMode::drain);
    for (auto& f : fs) CHECK(f.get().ok());
    CHECK(pool.submit(request("late", "x")).get().failure_message().find("shut down") != std::string::npos);
  }
  {
    EvalPool pool(std::make_shared<FakeBackend>(std::vector<FakeBackend::Entry>{}, slow), 1);
    std::vector<std::future<EvalResult>> fs;
    for (int i = 0; i < 50; ++i) fs.push_back(pool.submit(request("k" + std::to_string(i), "x")));
    const auto t0 = Clock::now();
    pool.shutdown(ShutdownMode::kill);
    CHECK(seconds_since(t0) < 0.5);
    int dropped = 0;
    for (auto& f : fs) dropped += !f.get().ok();
    CHECK(dropped > 0);
  }
  {
    // Killing shutdown terminates a hung worker instead of waiting for it.
    EvalPool pool(sandbox(false, 30), 1);
    auto f = pool.submit(request("hung", "#fw hang\n", json::array({1}), 30));
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    const auto t0 = Clock::now();
    pool.shutdown(ShutdownMode::kill);
    CHECK(f.get().failure() != FailureKind::none);
    CHECK(seconds_since(t0) < 5.0);
  }
}
