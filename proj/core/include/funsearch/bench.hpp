#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "funsearch/config.hpp"

namespace funsearch::bench {

/// One table row: statistics of the best score over repeated runs.
struct BenchRow {
  std::string model;
  std::vector<double> bests;
  double ave = 0.0;
  double min = 0.0;
  double max = 0.0;
  int count_at_max = 0;  ///< runs whose best equals `max`
  double cost_per_run = 0.0;  ///< estimate from configured prices
  bool partial = false;
  int failed_runs = 0;
};

/// Throws ValidationError when `bests` is empty.
BenchRow aggregate_bench(std::string model, const std::vector<double>& bests,
                         const std::vector<double>& costs = {});

struct BenchReport {
  std::vector<BenchRow> rows;
  int runs = 0;
  double budget = 0.0;

  nlohmann::json to_json() const;
  std::string to_markdown() const;
};

using ResourceFactory = std::function<config::Resources(const config::RunConfig&)>;

/// `runs` independent runs per configured model with seeds seed+0..runs-1.
/// A run that aborts or throws marks its row partial.
BenchReport run_bench(const config::RunConfig& config, int runs, int parallel_runs = 1,
                      const ResourceFactory& make = config::make_resources);

/// Ledger path of run `index` for `model`, derived from `base`.
std::string run_ledger_path(const std::string& base, const std::string& model, int index);

}  // namespace funsearch::bench
