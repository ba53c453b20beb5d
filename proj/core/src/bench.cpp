#include "funsearch/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <thread>

#include "funsearch/errors.hpp"

namespace funsearch::bench {

using nlohmann::json;

BenchRow aggregate_bench(std::string model, const std::vector<double>& bests, const std::vector<double>& costs) {
  if (bests.empty()) throw ValidationError("bench row needs at least one run");
  BenchRow row;
  row.model = std::move(model);
  row.bests = bests;
  row.ave = std::accumulate(bests.begin(), bests.end(), 0.0) / static_cast<double>(bests.size());
  row.min = *std::min_element(bests.begin(), bests.end());
  row.max = *std::max_element(bests.begin(), bests.end());
  row.count_at_max = static_cast<int>(std::count(bests.begin(), bests.end(), row.max));
  if (!costs.empty()) {
    row.cost_per_run = std::accumulate(costs.begin(), costs.end(), 0.0) / static_cast<double>(costs.size());
  }
  return row;
}

json BenchReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"model", r.model},
                         {"bests", r.bests},
                         {"ave_best", r.ave},
                         {"min_best", r.min},
                         {"max_best", r.max},
                         {"count_at_max", r.count_at_max},
                         {"cost_per_run_estimate", r.cost_per_run},
                         {"partial", r.partial},
                         {"failed_runs", r.failed_runs}});
  }
  return {{"runs", runs}, {"budget_per_run", budget}, {"rows", rows_json}};
}

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::string BenchReport::to_markdown() const {
  std::string out = "| model | ave best | min best | max best | #max | $/run (est.) |\n";
  out += "|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    if (r.bests.empty()) {
      out += "| " + r.model + " | - | - | - | - | - | (all runs failed)\n";
      continue;
    }
    out += "| " + r.model + (r.partial ? " (partial)" : "") + " | " + fmt("%.2f", r.ave) + " | " +
           fmt("%g", r.min) + " | " + fmt("%g", r.max) + " | " + std::to_string(r.count_at_max) + " | " +
           fmt("%.4f", r.cost_per_run) + " |\n";
  }
  out += "\n" + std::to_string(runs) + " runs per model, " + fmt("%g", budget) + " relative tokens per run.\n";
  return out;
}

std::string run_ledger_path(const std::string& base, const std::string& model, int index) {
  if (base.empty()) return {};
  std::filesystem::path p(base);
  std::string safe = model;
  for (char& c : safe) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  const std::string name = p.stem().string() + "-" + safe + "-" + std::to_string(index) + p.extension().string();
  return (p.parent_path() / name).string();
}

BenchReport run_bench(const config::RunConfig& config, int runs, int parallel_runs, const ResourceFactory& make) {
  if (runs < 1) throw ConfigError("bench needs at least one run");
  config.validate();
  BenchReport report;
  report.runs = runs;
  report.budget = config.engine.budget;
  const int workers = std::max(1, std::min({parallel_runs, runs,
                                            static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))}));

  for (const auto& model : config.models) {
    struct Outcome {
      bool done = false;
      bool partial = false;
      double best = 0.0;
      double cost = 0.0;
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(runs));
    std::atomic<int> next{0};
    auto work = [&] {
      for (int i = next++; i < runs; i = next++) {
        config::RunConfig c = config;
        c.models = {model};
        c.engine.seed = config.engine.seed + static_cast<std::uint64_t>(i);
        c.ledger_path = run_ledger_path(config.ledger_path, model.name, i);
        c.report_path.clear();
        c.trace_path.clear();
        Outcome& o = outcomes[static_cast<std::size_t>(i)];
        try {
          const auto r = config::execute_run(c, make(c));
          o.done = true;
          o.partial = r.partial;
          o.best = r.best_score;
          for (const auto& [name, usage] : r.token_usage.at("models").items()) o.cost += usage.at("cost").get<double>();
        } catch (const std::exception&) {
          o.partial = true;
        }
      }
    };
    std::vector<std::thread> threads;
    for (int t = 1; t < workers; ++t) threads.emplace_back(work);
    work();
    for (auto& t : threads) t.join();

    std::vector<double> bests, costs;
    bool partial = false;
    int failed = 0;
    for (const auto& o : outcomes) {
      partial = partial || o.partial;
      if (!o.done) {
        ++failed;
        continue;
      }
      bests.push_back(o.best);
      costs.push_back(o.cost);
    }
    BenchRow row;
    if (!bests.empty()) {
      row = aggregate_bench(model.name, bests, costs);
    } else {
      row.model = model.name;
    }
    row.partial = partial;
    row.failed_runs = failed;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace funsearch::bench
