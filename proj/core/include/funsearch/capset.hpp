#pragma once

#include <vector>

#include "funsearch/priority.hpp"

namespace funsearch::kernels {

/// Vectors over Z/3Z of dimension `n`, kept in insertion order.
struct CapSetInstance {
  int n = 0;
  std::vector<std::vector<int>> points;

  std::size_t size() const { return points.size(); }
};

/// Largest dimension for which the full space (3^n vectors) is materialised.
inline constexpr int kMaxCapSetDimension = 14;

/// All 3^n vectors of (Z/3Z)^n in lexicographic order.
std::vector<std::vector<int>> capset_space(int n);

/// True iff no three pairwise-distinct points sum to zero mod 3.
/// Throws ValidationError on a coordinate outside {0,1,2}, a wrong vector
/// length, or a duplicate vector.
bool verify_capset(const CapSetInstance& inst);

/// Adds vectors in descending priority (lexicographic tie-break), skipping
/// any vector that would complete a zero-sum triple. The result is maximal.
CapSetInstance capset_greedy_solve(int n, const PriorityOracle& priority);

/// Exact maximum cap size by subset enumeration; n <= 2 only.
int max_capset_bruteforce(int n);

}  // namespace funsearch::kernels
