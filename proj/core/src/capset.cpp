#include "funsearch/capset.hpp"

#include <string>
#include <unordered_map>

#include "funsearch/errors.hpp"

namespace funsearch::kernels {

namespace {

int pow3(int n) {
  int v = 1;
  for (int i = 0; i < n; ++i) v *= 3;
  return v;
}

struct VectorHash {
  std::size_t operator()(const std::vector<int>& v) const {
    std::size_t h = 0;
    for (int c : v) h = h * 31 + static_cast<std::size_t>(c);
    return h;
  }
};

void check_dimension(int n) {
  if (n < 0) throw ValidationError("cap-set dimension must be non-negative");
  if (n > kMaxCapSetDimension) {
    throw CapacityError("cap-set dimension " + std::to_string(n) + " exceeds limit " +
                        std::to_string(kMaxCapSetDimension));
  }
}

}  // namespace

std::vector<std::vector<int>> capset_space(int n) {
  check_dimension(n);
  const int total = pow3(n);
  std::vector<std::vector<int>> out(total, std::vector<int>(n));
  for (int idx = 0; idx < total; ++idx) {
    int rest = idx;
    for (int i = n - 1; i >= 0; --i) {
      out[idx][i] = rest % 3;
      rest /= 3;
    }
  }
  return out;
}

bool verify_capset(const CapSetInstance& inst) {
  if (inst.n < 0) throw ValidationError("cap-set dimension must be non-negative");
  std::unordered_map<std::vector<int>, std::size_t, VectorHash> index;
  for (std::size_t i = 0; i < inst.points.size(); ++i) {
    const auto& p = inst.points[i];
    if (static_cast<int>(p.size()) != inst.n) {
      throw ValidationError("cap-set vector " + std::to_string(i) + " has length " +
                            std::to_string(p.size()) + ", expected " + std::to_string(inst.n));
    }
    for (int c : p) {
      if (c < 0 || c > 2) {
        throw ValidationError("cap-set coordinate " + std::to_string(c) + " outside {0,1,2}");
      }
    }
    if (!index.emplace(p, i).second) {
      throw ValidationError("duplicate cap-set vector at position " + std::to_string(i));
    }
  }
  // For a < b the third vector c = -(a+b) is distinct from both, so each
  // zero-sum triple is found from its two lowest positions.
  std::vector<int> third(inst.n);
  for (std::size_t a = 0; a < inst.points.size(); ++a) {
    for (std::size_t b = a + 1; b < inst.points.size(); ++b) {
      for (int i = 0; i < inst.n; ++i) {
        third[i] = (6 - inst.points[a][i] - inst.points[b][i]) % 3;
      }
      auto it = index.find(third);
      if (it != index.end() && it->second > b) return false;
    }
  }
  return true;
}

CapSetInstance capset_greedy_solve(int n, const PriorityOracle& priority) {
  if (n < 1) throw ValidationError("cap-set dimension must be >= 1");
  const auto space = capset_space(n);
  const auto order = priority_order(n, space, priority);

  CapSetInstance out{n, {}};
  // Space indices are lexicographic, first coordinate most significant.
  // blocked[v]: some pair already in the set completes a zero-sum triple with v.
  std::vector<char> blocked(space.size(), 0);
  std::vector<char> present(space.size(), 0);
  std::vector<int> chosen;
  for (std::size_t idx : order) {
    if (blocked[idx] || present[idx]) continue;
    const auto& v = space[idx];
    for (int a : chosen) {
      int third = 0;
      for (int i = 0; i < n; ++i) third = third * 3 + (6 - space[a][i] - v[i]) % 3;
      blocked[third] = 1;
    }
    present[idx] = 1;
    chosen.push_back(static_cast<int>(idx));
    out.points.push_back(v);
  }
  return out;
}

int max_capset_bruteforce(int n) {
  if (n < 0) throw ValidationError("cap-set dimension must be non-negative");
  if (n > 2) {
    throw CapacityError("exhaustive cap-set search supports n <= 2, got " + std::to_string(n));
  }
  const auto space = capset_space(n);
  const int m = static_cast<int>(space.size());
  int best = 0;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    CapSetInstance inst{n, {}};
    for (int i = 0; i < m; ++i) {
      if (mask & (1u << i)) inst.points.push_back(space[i]);
    }
    if (static_cast<int>(inst.size()) > best && verify_capset(inst)) {
      best = static_cast<int>(inst.size());
    }
  }
  return best;
}

}  // namespace funsearch::kernels
