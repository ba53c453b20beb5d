// funsearch command-line entry point: run | bench | longrun | generalize |
// verify | oracle.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "funsearch/bench.hpp"
#include "funsearch/capset.hpp"
#include "funsearch/config.hpp"
#include "funsearch/construction.hpp"
#include "funsearch/errors.hpp"
#include "funsearch/generalize.hpp"
#include "funsearch/noiso.hpp"

namespace {

using nlohmann::json;
namespace fsc = funsearch::config;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

// Optional overrides shared by run, bench and longrun; flags win over the
// config file.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> budget;
  std::string models;
  std::string reset_interval;
  std::string out;
  std::string ledger;
  std::optional<int> islands, prompt_programs, samplers, evaluators;
  std::optional<double> temperature;
  std::optional<double> price_in, price_out, llm_temperature, weight;
  std::optional<int> max_tokens;
  std::string endpoint, api_key_env, token_formula;
  std::string replies, fake_table, worker;
  std::optional<double> timeout_s;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Run configuration JSON")->required()->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Base random seed");
    app->add_option("--budget", budget, "Relative-token budget per run");
    app->add_option("--models", models, "Comma-separated subset of configured models");
    app->add_option("--reset-interval", reset_interval, "tokens:N | minutes:N | short | long");
    app->add_option("--ledger", ledger, "Run ledger JSONL path");
    app->add_option("--islands", islands, "Island count");
    app->add_option("--prompt-programs", prompt_programs, "Programs shown per prompt");
    app->add_option("--samplers", samplers, "Concurrent samplers");
    app->add_option("--evaluators", evaluators, "Evaluation workers");
    app->add_option("--temperature", temperature, "Selection temperature");
    app->add_option("--price-in", price_in, "Input token price for every selected model");
    app->add_option("--price-out", price_out, "Output token price for every selected model");
    app->add_option("--llm-temperature", llm_temperature, "Sampling temperature sent to the models");
    app->add_option("--max-tokens", max_tokens, "Completion token limit");
    app->add_option("--weight", weight, "Model mixing weight");
    app->add_option("--endpoint", endpoint, "Chat-completions URL for every selected model");
    app->add_option("--api-key-env", api_key_env, "Environment variable holding the API key");
    app->add_option("--token-formula", token_formula, "price_ratio | cost_normalized");
    app->add_option("--replies", replies, "Use the scripted provider with this JSONL file");
    app->add_option("--fake-table", fake_table, "Use the fake backend with this table");
    app->add_option("--worker", worker, "Sandbox worker command (space separated)");
    app->add_option("--timeout", timeout_s, "Per-input evaluation timeout in seconds");
  }

  fsc::RunConfig apply() const {
    auto c = fsc::RunConfig::load(config_path);
    if (seed) c.engine.seed = *seed;
    if (budget) c.engine.budget = *budget;
    if (!reset_interval.empty()) c.engine.reset_interval = funsearch::engine::ResetInterval::parse(reset_interval);
    if (islands) c.engine.island_count = *islands;
    if (prompt_programs) c.engine.prompt_programs = *prompt_programs;
    if (samplers) c.engine.samplers = *samplers;
    if (evaluators) c.engine.evaluators = *evaluators;
    if (temperature) c.engine.temperature = *temperature;
    if (!models.empty()) {
      std::vector<std::string> names;
      std::stringstream ss(models);
      for (std::string name; std::getline(ss, name, ',');) {
        if (!name.empty()) names.push_back(name);
      }
      c.select_models(names);
    }
    for (auto& m : c.models) {
      if (price_in) m.price_in = *price_in;
      if (price_out) m.price_out = *price_out;
      if (llm_temperature) m.temperature = *llm_temperature;
      if (max_tokens) m.max_tokens = *max_tokens;
      if (weight) m.weight = *weight;
      if (!endpoint.empty()) m.endpoint = endpoint;
      if (!api_key_env.empty()) m.api_key_env = api_key_env;
    }
    if (!token_formula.empty()) {
      auto f = funsearch::llm::parse_token_formula(token_formula);
      if (!f) throw funsearch::ConfigError("unknown token formula '" + token_formula + "'");
      c.token_formula = *f;
    }
    if (!replies.empty()) {
      c.provider.kind = "scripted";
      c.provider.scripted_path = replies;
    }
    if (!fake_table.empty()) {
      c.backend.kind = "fake";
      c.backend.fake_table = fake_table;
    }
    if (!worker.empty()) {
      c.backend.kind = "sandbox";
      c.backend.command.clear();
      std::stringstream ss(worker);
      for (std::string arg; ss >> arg;) c.backend.command.push_back(arg);
    }
    if (timeout_s) c.eval.timeout_s = *timeout_s;
    if (!ledger.empty()) c.ledger_path = ledger;
    c.validate();
    return c;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw funsearch::ConfigError("cannot write " + path);
  out << text;
}

void print_summary(const funsearch::engine::RunReport& r) {
  std::cerr << "halt: " << funsearch::engine::to_string(r.halt) << (r.error.empty() ? "" : " (" + r.error + ")")
            << "\nbest score: " << r.best_score << " (seed " << r.seed_score << ")"
            << "\nrelative tokens: " << r.relative_total << "\nsamples: " << r.counts.samples
            << ", extraction failures: " << r.counts.extraction_failures
            << ", safety rejections: " << r.counts.safety_rejections
            << ", eval failures: " << r.counts.eval_failures
            << ", verification failures: " << r.counts.verification_failures << ", resets: " << r.counts.resets
            << '\n';
}

int exit_for(const funsearch::engine::RunReport& r) { return r.partial ? 3 : 0; }

int cmd_run(const Overrides& o) {
  auto c = o.apply();
  if (!o.out.empty()) c.report_path = o.out;
  const auto report = fsc::execute_run(c, fsc::make_resources(c), &g_stop);
  if (c.report_path.empty()) std::cout << report.to_json().dump(2) << '\n';
  print_summary(report);
  return exit_for(report);
}

int cmd_longrun(const Overrides& o, const std::string& report_path, double checkpoint_every) {
  auto c = o.apply();
  c.checkpoint_every = checkpoint_every;
  c.trace_path.clear();
  if (!report_path.empty()) c.report_path = report_path;
  const auto report = fsc::execute_run(c, fsc::make_resources(c), &g_stop);
  write_text(o.out, fsc::trace_csv(report));
  print_summary(report);
  return exit_for(report);
}

int cmd_bench(const Overrides& o, std::optional<int> runs, std::optional<int> parallel, const std::string& table) {
  auto c = o.apply();
  const auto report = funsearch::bench::run_bench(c, runs.value_or(c.bench_runs), parallel.value_or(c.parallel_runs));
  if (!o.out.empty()) write_text(o.out, report.to_json().dump(2) + "\n");
  write_text(table, report.to_markdown());
  std::cerr << "note: the best of several runs is typically better than a single run; rows report both\n";
  for (const auto& row : report.rows) {
    if (row.partial) return 3;
  }
  return 0;
}

std::vector<int> parse_n_values(const std::string& text) {
  std::vector<int> out;
  const auto colon = text.find(':');
  try {
    if (colon != std::string::npos) {
      const int lo = std::stoi(text.substr(0, colon));
      const int hi = std::stoi(text.substr(colon + 1));
      for (int n = lo; n <= hi; ++n) out.push_back(n);
      return out;
    }
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) out.push_back(std::stoi(item));
    }
  } catch (const std::exception&) {
    throw funsearch::ConfigError("bad n list '" + text + "' (use LO:HI or a,b,c)");
  }
  return out;
}

struct GeneralizeArgs {
  std::string baseline;
  std::uint64_t priority_seed = 0;
  std::string priority_file;
  std::string priority_call = "priority((x, y), n)";
  std::string worker;
  std::string variant = "basic";
  std::string n_values = "8:50";
  std::string out;
  double timeout_s = 60.0;
};

int cmd_generalize(const GeneralizeArgs& a) {
  namespace gen = funsearch::generalize;
  const auto variant = gen::Variant::parse(a.variant);
  const auto ns = parse_n_values(a.n_values);
  if (gen::single_parity(ns)) {
    std::cerr << "warning: every n has the same parity; mix odd and even sizes to avoid overfitting one parity\n";
  }
  std::vector<gen::SweepRow> rows;
  if (!a.priority_file.empty()) {
    if (a.worker.empty()) throw funsearch::ConfigError("--priority-file needs --worker");
    if (variant.kind == gen::Variant::Kind::nextpoint) {
      std::cerr << "note: nextpoint uses the tabulated priority as a descending-priority chooser\n";
    }
    std::ifstream in(a.priority_file);
    if (!in) throw funsearch::ConfigError("cannot open " + a.priority_file);
    std::stringstream source;
    source << in.rdbuf();
    funsearch::eval::SandboxBackend::Options opts;
    std::stringstream ss(a.worker);
    for (std::string arg; ss >> arg;) opts.command.push_back(arg);
    funsearch::eval::SandboxBackend backend(opts);
    rows = gen::generalization_sweep(
        [&](int n) { return gen::tabulate_priority(backend, source.str(), a.priority_call, n, a.timeout_s); },
        variant, ns);
  } else {
    const auto kind = funsearch::kernels::parse_baseline_kind(a.baseline.empty() ? "random" : a.baseline);
    if (!kind) throw funsearch::ConfigError("unknown baseline '" + a.baseline + "'");
    rows = gen::generalization_sweep(funsearch::kernels::baseline_priority(*kind, a.priority_seed), variant, ns);
  }
  write_text(a.out, gen::to_csv(rows, variant));
  bool any_ok = false;
  for (const auto& r : rows) {
    if (!r.ok) std::cerr << "n=" << r.n << " failed: " << r.error << '\n';
    any_ok = any_ok || r.ok;
  }
  return any_ok ? 0 : 1;
}

int cmd_verify(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << path << '\n';
    return 2;
  }
  funsearch::ConstructionRecord record;
  try {
    record = funsearch::construction_from_json(json::parse(in));
  } catch (const json::exception& e) {
    std::cerr << "error: " << path << ": " << e.what() << '\n';
    return 2;
  } catch (const funsearch::Error& e) {
    std::cerr << "error: " << path << ": " << e.what() << '\n';
    return 2;
  }
  const auto report = funsearch::verify_construction(record);
  std::cout << "problem: " << funsearch::to_string(report.problem) << "\nvalid: " << (report.valid ? "yes" : "no")
            << "\nsize: " << report.size << '\n';
  if (report.diameter) std::cout << "diameter: " << *report.diameter << '\n';
  if (!report.message.empty()) std::cout << "message: " << report.message << '\n';
  return report.valid ? 0 : 1;
}

int cmd_oracle(const std::string& problem, int n, const std::string& geometry) {
  int value = 0;
  if (problem == "capset") {
    value = funsearch::kernels::max_capset_bruteforce(n);
  } else if (problem == "noiso") {
    auto g = funsearch::kernels::parse_geometry(geometry);
    if (!g) throw funsearch::ConfigError("unknown geometry '" + geometry + "'");
    value = funsearch::kernels::max_noiso_bruteforce(n, *g);
  } else {
    throw funsearch::ConfigError("oracle supports capset and noiso, not '" + problem + "'");
  }
  std::cout << value << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-driven evolutionary search for priority functions"};
  app.require_subcommand(1);

  Overrides run_o, bench_o, long_o;
  auto* run = app.add_subcommand("run", "One evolution run");
  run_o.attach(run);
  run->add_option("--out", run_o.out, "Report JSON path (stdout if omitted)");

  auto* bench = app.add_subcommand("bench", "R independent runs per model, aggregated");
  bench_o.attach(bench);
  std::optional<int> runs, parallel;
  std::string table = "-";
  bench->add_option("--runs", runs, "Runs per model (default from config, 8)");
  bench->add_option("--parallel-runs", parallel, "Concurrent runs, capped by CPU count");
  bench->add_option("--out", bench_o.out, "Bench report JSON path");
  bench->add_option("--table", table, "Markdown table path (stdout by default)");

  auto* longrun = app.add_subcommand("longrun", "Single long run with a best-score trace");
  long_o.attach(longrun);
  std::string long_report;
  double checkpoint_every = 1e4;
  longrun->add_option("--out", long_o.out, "Trace CSV path (stdout if omitted)");
  longrun->add_option("--report", long_report, "Report JSON path");
  longrun->add_option("--checkpoint-every", checkpoint_every, "Relative tokens between trace points")
      ->check(CLI::PositiveNumber);

  GeneralizeArgs gen;
  auto* generalize = app.add_subcommand("generalize", "Sweep a priority over grid sizes");
  generalize->add_option("--baseline", gen.baseline, "random | l2");
  generalize->add_option("--priority-seed", gen.priority_seed, "Seed of the random baseline");
  generalize->add_option("--priority-file", gen.priority_file, "Evolved priority source")->check(CLI::ExistingFile);
  generalize->add_option("--priority-call", gen.priority_call, "Guest expression scoring point (x, y)");
  generalize->add_option("--worker", gen.worker, "Sandbox worker command for --priority-file");
  generalize->add_option("--variant", gen.variant,
                         "basic | torus | removal | symmetric:<group> | nextpoint:<c>n[^2] | smallmax");
  generalize->add_option("--n", gen.n_values, "LO:HI or comma list");
  generalize->add_option("--timeout", gen.timeout_s, "Tabulation timeout per n");
  generalize->add_option("--out", gen.out, "CSV path (stdout if omitted)");
  generalize->get_option("--priority-file")->excludes("--baseline");

  std::string verify_path;
  auto* verify = app.add_subcommand("verify", "Check a construction file");
  verify->add_option("file", verify_path, "Construction JSON")->required();

  std::string oracle_problem, geometry = "planar";
  int oracle_n = 0;
  auto* oracle = app.add_subcommand("oracle", "Exact maximum by exhaustive search");
  oracle->add_option("problem", oracle_problem, "capset | noiso")->required();
  oracle->add_option("n", oracle_n, "Dimension or grid side")->required();
  oracle->add_option("--geometry", geometry, "planar | torus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*run) return cmd_run(run_o);
    if (*bench) return cmd_bench(bench_o, runs, parallel, table);
    if (*longrun) return cmd_longrun(long_o, long_report, checkpoint_every);
    if (*generalize) return cmd_generalize(gen);
    if (*verify) return cmd_verify(verify_path);
    if (*oracle) return cmd_oracle(oracle_problem, oracle_n, geometry);
  } catch (const funsearch::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
