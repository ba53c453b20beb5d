#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace funsearch::kernels {

/// Scores an element (a cap-set vector or a grid point given as coordinates)
/// for a problem of size `n`. Higher scores are considered first by the
/// greedy solvers. Every oracle is immutable and deterministic.
class PriorityOracle {
 public:
  enum class Kind { table, random, l2_center, constant, function };
  using Fn = std::function<double(int n, std::span<const int> element)>;

  static PriorityOracle constant(double value);
  static PriorityOracle random(std::uint64_t seed);
  /// Euclidean distance from the centre ((n-1)/2, ..., (n-1)/2).
  static PriorityOracle l2_center();
  /// Lookup table keyed by element coordinates; missing keys score `fallback`.
  static PriorityOracle table(std::map<std::vector<int>, double> values, double fallback = 0.0);
  static PriorityOracle from_function(Fn fn);

  Kind kind() const { return kind_; }
  double operator()(int n, std::span<const int> element) const;

  /// c * P + b, used to check the solvers only depend on the induced order.
  PriorityOracle affine(double scale, double offset) const;

 private:
  PriorityOracle(Kind kind, Fn fn) : kind_(kind), fn_(std::move(fn)) {}

  Kind kind_;
  Fn fn_;
};

enum class BaselineKind { random, l2_center };

std::optional<BaselineKind> parse_baseline_kind(const std::string& name);

/// Baseline oracles; `seed` is mandatory for the random kind.
PriorityOracle baseline_priority(BaselineKind kind, std::optional<std::uint64_t> seed = std::nullopt);

/// Indices of `elements` in the order a greedy solver visits them: each
/// element is scored exactly once, then sorted by descending score with ties
/// (and NaN scores, which sort last) resolved by position in `elements`.
/// Oracle exceptions propagate as EvaluationError.
std::vector<std::size_t> priority_order(int n, const std::vector<std::vector<int>>& elements,
                                        const PriorityOracle& oracle);

}  // namespace funsearch::kernels
