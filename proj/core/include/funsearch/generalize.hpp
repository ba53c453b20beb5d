#pragma once

#include <functional>
#include <string>
#include <vector>

#include "funsearch/eval_pool.hpp"
#include "funsearch/noiso.hpp"
#include "funsearch/priority.hpp"

namespace funsearch::generalize {

struct Variant {
  enum class Kind { basic, torus, removal, symmetric, nextpoint, smallmax };
  Kind kind = Kind::basic;
  kernels::SymmetryGroup group = kernels::SymmetryGroup::axes4;
  /// nextpoint budget = ceil(budget_scale * n^budget_power)
  double budget_scale = 3.0;
  int budget_power = 1;

  /// basic | torus | removal | symmetric:<axes4|diag2|diags4> |
  /// nextpoint:<c>n | nextpoint:<c>n^2 | smallmax. Throws ConfigError.
  static Variant parse(const std::string& text);
  std::string to_string() const;
  int nextpoint_budget(int n) const;
};

struct SweepRow {
  int n = 0;
  int size = 0;
  double size_over_n = 0.0;
  bool ok = false;
  double score = 0.0;  ///< size, or -size for smallmax
  std::string error;
};

/// Priority used at grid side n; lets evolved code be tabulated per n.
using OracleFactory = std::function<kernels::PriorityOracle(int n)>;

/// One row per n. A failing n is marked and the sweep continues. Throws
/// ValidationError for empty `n_values`.
std::vector<SweepRow> generalization_sweep(const OracleFactory& priority, const Variant& variant,
                                           const std::vector<int>& n_values);
std::vector<SweepRow> generalization_sweep(const kernels::PriorityOracle& priority, const Variant& variant,
                                           const std::vector<int>& n_values);

/// True when two or more n values all share one parity (sweeps should mix
/// both).
bool single_parity(const std::vector<int>& n_values);

/// Columns n,size,size_over_n,ok; smallmax adds a score column and a
/// leading comment that lower sizes are better.
std::string to_csv(const std::vector<SweepRow>& rows, const Variant& variant);

/// Tabulates an evolved priority over the n x n grid by running it through
/// `backend`. `call` is the guest expression evaluated per point, with `x`,
/// `y` and `n` bound, e.g. "priority((x, y), n)".
kernels::PriorityOracle tabulate_priority(eval::Backend& backend, const std::string& source,
                                          const std::string& call, int n, double timeout_s = 60.0);

/// Guest harness appended to evolved code by tabulate_priority.
std::string tabulation_harness(const std::string& call);

inline constexpr const char* kTabulationEntry = "funsearch_priority_table";

}  // namespace funsearch::generalize
