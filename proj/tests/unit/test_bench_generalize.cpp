#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "engine_fixture.hpp"
#include "funsearch/bench.hpp"
#include "funsearch/config.hpp"
#include "funsearch/errors.hpp"
#include "funsearch/generalize.hpp"

using namespace funsearch;
using namespace funsearch::bench;
using namespace funsearch::generalize;
using nlohmann::json;

TEST_CASE("bench aggregation over the eight-run fixture") {
  const std::vector<double> bests = {3, 5, 5, 4, 5, 2, 1, 5};
  const auto row = aggregate_bench("m", bests, std::vector<double>(8, 0.25));
  CHECK(row.ave == 3.75);
  CHECK(row.min == 1);
  CHECK(row.max == 5);
  CHECK(row.count_at_max == 4);
  CHECK(row.cost_per_run == doctest::Approx(0.25));
  CHECK(row.min <= row.ave);
  CHECK(row.ave <= row.max);

  const auto single = aggregate_bench("m", {7});
  CHECK(single.ave == 7);
  CHECK(single.min == 7);
  CHECK(single.max == 7);
  CHECK(single.count_at_max == 1);

  CHECK_THROWS_AS(aggregate_bench("m", {}), ValidationError);
}

TEST_CASE("bench report rendering") {
  BenchReport report;
  report.runs = 8;
  report.budget = 2e6;
  report.rows.push_back(aggregate_bench("small-model", {3, 5, 5, 4, 5, 2, 1, 5}, std::vector<double>(8, 1.5)));
  const auto md = report.to_markdown();
  CHECK(md.find("| model | ave best | min best | max best | #max | $/run (est.) |") != std::string::npos);
  CHECK(md.find("small-model") != std::string::npos);
  CHECK(md.find("3.75") != std::string::npos);
  const auto j = report.to_json();
  CHECK(j["runs"] == 8);
  CHECK(j["rows"][0]["count_at_max"] == 4);
  CHECK(j["rows"][0]["bests"].size() == 8);
}

namespace {

config::RunConfig fixture_config() {
  auto c = config::RunConfig::load(fixture::path("run_config.json"));
  c.ledger_path.clear();
  c.report_path.clear();
  c.trace_path.clear();
  return c;
}

}  // namespace

TEST_CASE("run config loading") {
  const auto c = config::RunConfig::load(fixture::path("run_config.json"));
  CHECK(std::filesystem::path(c.spec_path).filename() == "prime_spec.py");
  CHECK(std::filesystem::path(c.spec_path).is_absolute());
  CHECK(c.engine.island_count == 4);
  CHECK(c.engine.samplers == 1);
  CHECK(c.engine.prompt_programs == 2);
  CHECK(c.provider.kind == "scripted");
  CHECK_NOTHROW(c.validate());
  auto broken = c;
  broken.spec_path = "/nonexistent/spec.py";
  CHECK_THROWS_AS(broken.validate(), ConfigError);
  auto two = c;
  two.models.push_back(two.models[0]);
  two.models[1].name = "other";
  two.select_models({"other"});
  REQUIRE(two.models.size() == 1);
  CHECK(two.models[0].name == "other");
  CHECK_THROWS_AS(two.select_models({"missing"}), ConfigError);
  const auto round = config::RunConfig::from_json(c.to_json());
  CHECK(round.engine.budget == c.engine.budget);
  CHECK(round.spec_path == c.spec_path);
}

TEST_CASE("bench runs reproduce canned per-seed bests") {
  // Seed i of the bench scores bests[i]: the backend is chosen per run.
  const std::vector<double> bests = {3, 5, 5, 4, 5, 2, 1, 5};
  auto cfg = fixture_config();
  cfg.engine.budget = 0;
  const auto base_seed = cfg.engine.seed;
  auto factory = [&](const config::RunConfig& run) {
    auto res = config::make_resources(run);
    eval::FakeBackend::Entry e;
    e.scores = {bests.at(run.engine.seed - base_seed)};
    res.backend = std::make_shared<eval::FakeBackend>(std::vector<eval::FakeBackend::Entry>{}, e);
    return res;
  };
  for (int parallel : {1, 3}) {
    const auto report = run_bench(cfg, 8, parallel, factory);
    REQUIRE(report.rows.size() == 1);
    const auto& row = report.rows[0];
    CHECK(row.bests == bests);
    CHECK(row.ave == 3.75);
    CHECK(row.min == 1);
    CHECK(row.max == 5);
    CHECK(row.count_at_max == 4);
    CHECK_FALSE(row.partial);
  }
}

TEST_CASE("bench marks a row partial when a run aborts") {
  auto cfg = fixture_config();
  cfg.engine.budget = 0;
  auto factory = [&](const config::RunConfig& run) {
    auto res = config::make_resources(run);
    if (run.engine.seed == cfg.engine.seed + 1) {
      res.backend = std::make_shared<eval::FakeBackend>(std::vector<eval::FakeBackend::Entry>{});
    }
    return res;
  };
  const auto report = run_bench(cfg, 3, 1, factory);
  CHECK(report.rows[0].partial);
  CHECK(report.rows[0].failed_runs == 1);
  CHECK(report.rows[0].bests.size() == 2);
}

TEST_CASE("bench with the scripted fixture stays within budget") {
  auto cfg = fixture_config();
  cfg.engine.budget = 2000;
  const auto report = run_bench(cfg, 2);
  const auto& row = report.rows[0];
  CHECK(row.bests.size() == 2);
  for (double b : row.bests) CHECK(b >= 8);
  // 2000 relative tokens at unit prices is 1000 input and 1000 output tokens.
  CHECK(row.cost_per_run == doctest::Approx(2000));
}

TEST_CASE("per-run ledger paths") {
  CHECK(run_ledger_path("", "m", 0).empty());
  const auto a = run_ledger_path("out/ledger.jsonl", "m", 0);
  const auto b = run_ledger_path("out/ledger.jsonl", "m", 1);
  CHECK(a != b);
  CHECK(a.find("ledger") != std::string::npos);
  CHECK(a != run_ledger_path("out/ledger.jsonl", "other", 0));
}

TEST_CASE("scripted run and trace CSV") {
  auto cfg = fixture_config();
  const auto res = config::make_resources(cfg);
  const auto a = config::execute_run(cfg, res);
  const auto b = config::execute_run(cfg, config::make_resources(cfg));
  CHECK(a.best_score == 18);
  CHECK(b.best_score == 18);
  CHECK(a.membership == b.membership);
  const auto csv = config::trace_csv(a);
  CHECK(csv.rfind("n_R,best\n", 0) == 0);
  CHECK(csv == config::trace_csv(b));
}

TEST_CASE("variant parsing") {
  CHECK(Variant::parse("basic").kind == Variant::Kind::basic);
  CHECK(Variant::parse("torus").kind == Variant::Kind::torus);
  CHECK(Variant::parse("removal").kind == Variant::Kind::removal);
  CHECK(Variant::parse("smallmax").kind == Variant::Kind::smallmax);
  const auto sym = Variant::parse("symmetric:diag2");
  CHECK(sym.kind == Variant::Kind::symmetric);
  CHECK(sym.group == kernels::SymmetryGroup::diag2);
  CHECK(Variant::parse("nextpoint:3n").nextpoint_budget(10) == 30);
  CHECK(Variant::parse("nextpoint:2n^2").nextpoint_budget(10) == 200);
  CHECK(Variant::parse("nextpoint:n^2").nextpoint_budget(7) == 49);
  for (const char* text : {"basic", "torus", "symmetric:axes4", "nextpoint:3n", "smallmax"}) {
    CHECK(Variant::parse(Variant::parse(text).to_string()).to_string() == Variant::parse(text).to_string());
  }
  CHECK_THROWS_AS(Variant::parse("spiral"), ConfigError);
  CHECK_THROWS_AS(Variant::parse("symmetric:c5"), ConfigError);
  CHECK_THROWS_AS(Variant::parse("nextpoint:3m"), ConfigError);
}

TEST_CASE("baseline sweeps verify at every n") {
  std::vector<int> ns(57);
  std::iota(ns.begin(), ns.end(), 8);
  const auto random_rows = generalization_sweep(kernels::baseline_priority(kernels::BaselineKind::random, 3),
                                                Variant::parse("basic"), ns);
  REQUIRE(random_rows.size() == ns.size());
  for (const auto& r : random_rows) {
    CHECK(r.ok);
    CHECK(r.size_over_n == doctest::Approx(static_cast<double>(r.size) / r.n));
  }
  std::vector<int> train(43);
  std::iota(train.begin(), train.end(), 8);
  for (const auto& r : generalization_sweep(kernels::PriorityOracle::l2_center(), Variant::parse("basic"), train)) {
    CHECK(r.ok);
  }
}

TEST_CASE("every variant produces verified rows") {
  const std::vector<int> ns = {5, 6, 9, 10};
  for (const char* text :
       {"basic", "torus", "removal", "symmetric:axes4", "symmetric:diag2", "symmetric:diags4", "nextpoint:3n",
        "smallmax"}) {
    CAPTURE(text);
    const auto rows = generalization_sweep(kernels::PriorityOracle::random(11), Variant::parse(text), ns);
    for (const auto& r : rows) {
      CHECK(r.ok);
      CHECK(r.size > 0);
    }
  }
  const auto tiny = generalization_sweep(kernels::PriorityOracle::random(1), Variant::parse("basic"), {2});
  CHECK(tiny[0].size == 2);
  CHECK_THROWS_AS(generalization_sweep(kernels::PriorityOracle::random(1), Variant::parse("basic"), {}),
                  ValidationError);
}

TEST_CASE("failing n is marked and the sweep continues") {
  OracleFactory factory = [](int n) {
    if (n == 7) throw EvaluationError("priority raised at n=7");
    return kernels::PriorityOracle::l2_center();
  };
  const auto rows = generalization_sweep(factory, Variant::parse("basic"), {6, 7, 8});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].ok);
  CHECK_FALSE(rows[1].ok);
  CHECK(rows[1].error.find("n=7") != std::string::npos);
  CHECK(rows[2].ok);
}

TEST_CASE("smallmax reports negative sizes") {
  const auto v = Variant::parse("smallmax");
  const auto rows = generalization_sweep(kernels::PriorityOracle::random(2), v, {6, 7});
  for (const auto& r : rows) CHECK(r.score == -r.size);
  const auto csv = to_csv(rows, v);
  CHECK(csv.rfind("# objective: score = -size of a maximal set; lower size is better\n"
                  "n,size,size_over_n,ok,score\n",
                  0) == 0);
  const auto plain = to_csv(generalization_sweep(kernels::PriorityOracle::random(2), Variant::parse("basic"), {6}),
                            Variant::parse("basic"));
  CHECK(plain.rfind("n,size,size_over_n,ok\n", 0) == 0);
}

TEST_CASE("single parity detection") {
  CHECK(single_parity({8, 10, 12}));
  // One grid size is a spot check, not a training set; no warning.
  CHECK_FALSE(single_parity({9}));
  CHECK_FALSE(single_parity({8, 9}));
}

TEST_CASE("evolved priorities are tabulated through the worker") {
  SUBCASE("harness shape") {
    const auto h = tabulation_harness("priority((x, y), n)");
    CHECK(h.find(std::string("def ") + kTabulationEntry + "(n") != std::string::npos);
    CHECK(h.find("priority((x, y), n)") != std::string::npos);
  }
  eval::SandboxBackend::Options o;
  o.command = {FUNSEARCH_FAKE_WORKER};
  eval::SandboxBackend backend(o);
  const auto oracle = tabulate_priority(backend, "#fw table\ndef priority(el, n):\n  return 0.0\n",
                                        "priority((x, y), n)", 5, 5.0);
  for (int x = 0; x < 5; ++x) {
    for (int y = 0; y < 5; ++y) {
      const int el[2] = {x, y};
      CHECK(oracle(5, el) == x * 5 + y);
    }
  }
  CHECK_THROWS(tabulate_priority(backend, "#fw raise\n", "priority((x, y), n)", 5, 5.0));
}
