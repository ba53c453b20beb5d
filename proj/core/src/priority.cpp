#include "funsearch/priority.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "funsearch/errors.hpp"
#include "funsearch/hashing.hpp"

namespace funsearch::kernels {

PriorityOracle PriorityOracle::constant(double value) {
  return PriorityOracle(Kind::constant, [value](int, std::span<const int>) { return value; });
}

PriorityOracle PriorityOracle::random(std::uint64_t seed) {
  return PriorityOracle(Kind::random, [seed](int n, std::span<const int> element) {
    std::uint64_t h = splitmix64(seed ^ 0x9e3779b97f4a7c15ULL);
    h = splitmix64(h ^ static_cast<std::uint64_t>(n));
    for (int c : element) {
      h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(c)));
    }
    // 53 random mantissa bits -> [0, 1)
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  });
}

PriorityOracle PriorityOracle::l2_center() {
  return PriorityOracle(Kind::l2_center, [](int n, std::span<const int> element) {
    const double centre = (n - 1) / 2.0;
    double sum = 0.0;
    for (int c : element) {
      const double d = c - centre;
      sum += d * d;
    }
    return std::sqrt(sum);
  });
}

PriorityOracle PriorityOracle::table(std::map<std::vector<int>, double> values, double fallback) {
  auto shared = std::make_shared<const std::map<std::vector<int>, double>>(std::move(values));
  return PriorityOracle(Kind::table, [shared, fallback](int, std::span<const int> element) {
    const std::vector<int> key(element.begin(), element.end());
    auto it = shared->find(key);
    return it == shared->end() ? fallback : it->second;
  });
}

PriorityOracle PriorityOracle::from_function(Fn fn) {
  return PriorityOracle(Kind::function, std::move(fn));
}

double PriorityOracle::operator()(int n, std::span<const int> element) const {
  return fn_(n, element);
}

PriorityOracle PriorityOracle::affine(double scale, double offset) const {
  Fn inner = fn_;
  return PriorityOracle(kind_, [inner, scale, offset](int n, std::span<const int> element) {
    return scale * inner(n, element) + offset;
  });
}

std::optional<BaselineKind> parse_baseline_kind(const std::string& name) {
  if (name == "random") return BaselineKind::random;
  if (name == "l2" || name == "l2-center" || name == "l2_center") return BaselineKind::l2_center;
  return std::nullopt;
}

PriorityOracle baseline_priority(BaselineKind kind, std::optional<std::uint64_t> seed) {
  switch (kind) {
    case BaselineKind::random:
      if (!seed) throw ValidationError("random baseline priority requires a seed");
      return PriorityOracle::random(*seed);
    case BaselineKind::l2_center:
      return PriorityOracle::l2_center();
  }
  throw ValidationError("unknown baseline priority");
}

std::vector<std::size_t> priority_order(int n, const std::vector<std::vector<int>>& elements,
                                        const PriorityOracle& oracle) {
  std::vector<double> scores(elements.size());
  for (std::size_t i = 0; i < elements.size(); ++i) {
    try {
      scores[i] = oracle(n, elements[i]);
    } catch (const EvaluationError&) {
      throw;
    } catch (const std::exception& e) {
      throw EvaluationError(std::string("priority function failed: ") + e.what());
    }
    if (std::isnan(scores[i])) scores[i] = -INFINITY;
  }
  std::vector<std::size_t> order(elements.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace funsearch::kernels
