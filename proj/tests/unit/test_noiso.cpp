#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "funsearch/errors.hpp"
#include "funsearch/noiso.hpp"
#include "funsearch/priority.hpp"
#include "oracles.hpp"

using namespace funsearch;
using namespace funsearch::kernels;

namespace {

std::vector<std::pair<int, int>> pairs(const GridSubset& s) {
  std::vector<std::pair<int, int>> out;
  for (const auto& p : s.points) out.push_back({p.x, p.y});
  return out;
}

GridSubset make(int n, std::vector<GridPoint> pts, Geometry g = Geometry::planar) { return {n, g, std::move(pts)}; }

// Exhaustive maximum for n = 3 over all 512 subsets, computed with the
// naive oracle and recorded here.
constexpr int kMaxNoIsoPlanar3 = 4;

}  // namespace

TEST_CASE("verify_noiso examples") {
  CHECK_FALSE(verify_noiso(make(4, {{0, 0}, {0, 1}, {1, 0}})));
  CHECK_FALSE(verify_noiso(make(4, {{0, 0}, {0, 1}, {0, 2}})));
  CHECK(verify_noiso(make(4, {{0, 0}, {1, 0}, {3, 0}})));
  CHECK(verify_noiso(make(4, {})));
  CHECK_THROWS_AS(verify_noiso(make(4, {{0, 4}})), ValidationError);
  CHECK_THROWS_AS(verify_noiso(make(4, {{1, 1}, {1, 1}})), ValidationError);
}

TEST_CASE("torus distance folds each coordinate") {
  CHECK(squared_distance({0, 0}, {4, 0}, 5, Geometry::torus) == 1);
  CHECK(squared_distance({0, 0}, {4, 0}, 5, Geometry::planar) == 16);
  CHECK(squared_distance({0, 0}, {3, 3}, 6, Geometry::torus) == 18);
  // Planar-valid but isosceles once wrapped: (0,0),(1,0),(4,0) on a 5-torus.
  CHECK(verify_noiso(make(5, {{0, 0}, {1, 0}, {3, 0}})));
  CHECK_FALSE(verify_noiso(make(5, {{0, 0}, {1, 0}, {4, 0}}, Geometry::torus)));
}

TEST_CASE("brute-force maxima") {
  CHECK(max_noiso_bruteforce(1) == 1);
  CHECK(max_noiso_bruteforce(2) == 2);
  CHECK(max_noiso_bruteforce(3) == kMaxNoIsoPlanar3);
  CHECK_THROWS_AS(max_noiso_bruteforce(5), CapacityError);
  for (int n = 1; n <= 4; ++n) {
    for (bool torus : {false, true}) {
      std::vector<std::pair<int, int>> grid;
      for (const auto& p : grid_points(n)) grid.push_back({p.x, p.y});
      const int expected = oracle::brute_max(grid, [&](const auto& s) { return oracle::naive_noiso(s, n, torus); });
      CHECK(max_noiso_bruteforce(n, torus ? Geometry::torus : Geometry::planar) == expected);
    }
  }
}

TEST_CASE("greedy examples and maximality") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CHECK(noiso_greedy_solve(2, PriorityOracle::random(seed)).points.size() == 2);
    CHECK(noiso_greedy_solve(9, PriorityOracle::random(seed)).points.size() >= 2);
  }
  CHECK(verify_noiso(noiso_greedy_solve(64, PriorityOracle::l2_center())));
  for (int n = 1; n <= 12; ++n) {
    for (Geometry g : {Geometry::planar, Geometry::torus}) {
      const auto s = noiso_greedy_solve(n, PriorityOracle::random(100 + n), g);
      auto pts = pairs(s);
      REQUIRE(oracle::naive_noiso(pts, n, g == Geometry::torus));
      std::set<std::pair<int, int>> in(pts.begin(), pts.end());
      for (const auto& p : grid_points(n)) {
        if (in.count({p.x, p.y})) continue;
        auto ext = pts;
        ext.push_back({p.x, p.y});
        CHECK_FALSE(oracle::naive_noiso(ext, n, g == Geometry::torus));
      }
    }
  }
}

TEST_CASE("greedy tie-break is row-major") {
  const auto s = noiso_greedy_solve(3, PriorityOracle::constant(1));
  REQUIRE(s.points.size() >= 2);
  CHECK(s.points[0] == GridPoint{0, 0});
  CHECK(s.points[1] == GridPoint{0, 1});
}

TEST_CASE("removal solver") {
  const auto one = noiso_removal_solve(1, PriorityOracle::random(1));
  CHECK(one.points == std::vector<GridPoint>{{0, 0}});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CHECK(noiso_removal_solve(2, PriorityOracle::random(seed)).points.size() == 2);
  }
  CHECK(verify_noiso(noiso_removal_solve(32, PriorityOracle::random(3))));
  // Highest priority goes first: with priority x*n+y the last rows go.
  const auto s = noiso_removal_solve(3, PriorityOracle::from_function([](int n, std::span<const int> e) {
    return static_cast<double>(e[0] * n + e[1]);
  }));
  CHECK(verify_noiso(s));
  CHECK(std::find(s.points.begin(), s.points.end(), GridPoint{0, 0}) != s.points.end());
}

TEST_CASE("symmetry group actions") {
  for (auto g : {SymmetryGroup::axes4, SymmetryGroup::diag2, SymmetryGroup::diags4}) {
    for (int n : {5, 6}) {
      for (const auto& p : grid_points(n)) {
        for (int e = 0; e < group_order(g); ++e) {
          const auto q = apply_symmetry(p, n, g, e);
          CHECK(q.x >= 0);
          CHECK(q.x < n);
          CHECK(q.y >= 0);
          CHECK(q.y < n);
          CHECK(apply_symmetry(q, n, g, e) == p);  // every element here is an involution
        }
      }
    }
  }
  CHECK(orbit({0, 1}, 3, SymmetryGroup::diag2) == std::vector<GridPoint>{{0, 1}, {1, 0}});
  CHECK(orbit({1, 1}, 3, SymmetryGroup::axes4) == std::vector<GridPoint>{{1, 1}});
}

TEST_CASE("verifier is invariant under the symmetry groups") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 6);
    std::set<GridPoint> pts;
    const int k = 2 + static_cast<int>(rng() % 6);
    while (static_cast<int>(pts.size()) < k) pts.insert({static_cast<int>(rng() % n), static_cast<int>(rng() % n)});
    const GridSubset s = make(n, {pts.begin(), pts.end()});
    for (auto g : {SymmetryGroup::axes4, SymmetryGroup::diag2, SymmetryGroup::diags4}) {
      for (int e = 0; e < group_order(g); ++e) {
        GridSubset t = s;
        for (auto& p : t.points) p = apply_symmetry(p, n, g, e);
        CHECK(verify_noiso(t) == verify_noiso(s));
      }
    }
  }
}

TEST_CASE("torus agrees with planar for tightly clustered points") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 20;
    std::set<GridPoint> pts;
    const int k = 2 + static_cast<int>(rng() % 5);
    while (static_cast<int>(pts.size()) < k) pts.insert({static_cast<int>(rng() % 8), static_cast<int>(rng() % 8)});
    GridSubset planar = make(n, {pts.begin(), pts.end()});
    GridSubset torus = planar;
    torus.geometry = Geometry::torus;
    CHECK(verify_noiso(planar) == verify_noiso(torus));
  }
}

TEST_CASE("symmetric solver") {
  const auto orbit_first = PriorityOracle::table({{{0, 1}, 5.0}}, 0.0);
  const auto s = noiso_symmetric_solve(3, orbit_first, SymmetryGroup::diag2);
  CHECK(std::find(s.points.begin(), s.points.end(), GridPoint{0, 1}) != s.points.end());
  CHECK(std::find(s.points.begin(), s.points.end(), GridPoint{1, 0}) != s.points.end());
  for (auto g : {SymmetryGroup::axes4, SymmetryGroup::diag2, SymmetryGroup::diags4}) {
    for (int n : {5, 8, 13}) {
      const auto r = noiso_symmetric_solve(n, PriorityOracle::random(n), g);
      CHECK(verify_noiso(r));
      std::set<GridPoint> in(r.points.begin(), r.points.end());
      for (const auto& p : r.points) {
        for (const auto& q : orbit(p, n, g)) CHECK(in.count(q) == 1);
      }
      if (n == 13) CHECK(r.points.size() <= 22);
    }
  }
  const auto d = noiso_symmetric_solve(48, PriorityOracle::random(48), SymmetryGroup::diags4);
  std::set<GridPoint> in(d.points.begin(), d.points.end());
  for (const auto& p : d.points) {
    CHECK(in.count({p.y, p.x}) == 1);
    CHECK(in.count({47 - p.y, 47 - p.x}) == 1);
  }
}

TEST_CASE("next-point solver") {
  int calls = 0;
  auto counting = [&](const GridSubset& cur) {
    ++calls;
    return GridPoint{static_cast<int>(cur.points.size() * 7 % 32), static_cast<int>(calls % 32)};
  };
  const auto r = noiso_nextpoint_solve(32, counting, 96);
  CHECK(calls <= 96);
  CHECK(r.chooser_calls == calls);
  CHECK(verify_noiso(r.subset));

  const auto same = noiso_nextpoint_solve(8, [](const GridSubset&) { return GridPoint{0, 0}; }, 10);
  CHECK(same.subset.points == std::vector<GridPoint>{{0, 0}});
  CHECK(same.chooser_calls == 10);
  CHECK(same.rejected == 9);

  const auto off = noiso_nextpoint_solve(4, [](const GridSubset&) { return GridPoint{9, -1}; }, 3);
  CHECK(off.subset.points.empty());

  const auto big = noiso_nextpoint_solve(8, chooser_from_priority(PriorityOracle::random(2), 8), 64);
  CHECK(verify_noiso(big.subset));
  CHECK(big.chooser_calls <= 64);

  CHECK_THROWS_AS(noiso_nextpoint_solve(8, [](const GridSubset&) -> GridPoint { throw std::runtime_error("x"); }, 3),
                  EvaluationError);
  CHECK_THROWS_AS(noiso_nextpoint_solve(8, [](const GridSubset&) { return GridPoint{0, 0}; }, 0), ValidationError);
}

TEST_CASE("baseline priorities") {
  const auto l2 = baseline_priority(BaselineKind::l2_center);
  const int origin[2] = {0, 0};
  const int centre[2] = {1, 1};
  CHECK(l2(3, origin) == doctest::Approx(std::sqrt(2.0)));
  CHECK(l2(3, centre) == 0.0);
  const auto r = baseline_priority(BaselineKind::random, 42);
  const int pt[2] = {3, 4};
  CHECK(r(8, pt) == r(8, pt));
  CHECK(r(8, pt) != baseline_priority(BaselineKind::random, 43)(8, pt));
  CHECK_THROWS_AS(baseline_priority(BaselineKind::random), ValidationError);
  CHECK(parse_baseline_kind("l2") == BaselineKind::l2_center);
  CHECK_FALSE(parse_baseline_kind("l3").has_value());
}

TEST_CASE("all variants produce valid sets across many seeds") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 9);
    const auto p = PriorityOracle::random(rng());
    CHECK(verify_noiso(noiso_greedy_solve(n, p)));
    CHECK(verify_noiso(noiso_greedy_solve(n, p, Geometry::torus)));
    CHECK(verify_noiso(noiso_removal_solve(n, p)));
    const auto g = static_cast<SymmetryGroup>(trial % 3);
    CHECK(verify_noiso(noiso_symmetric_solve(n, p, g)));
    CHECK(verify_noiso(noiso_nextpoint_solve(n, chooser_from_priority(p, n), 3 * n).subset));
  }
}
