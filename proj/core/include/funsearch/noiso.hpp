#pragma once

#include <compare>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "funsearch/priority.hpp"

namespace funsearch::kernels {

enum class Geometry { planar, torus };

std::string to_string(Geometry g);
std::optional<Geometry> parse_geometry(const std::string& name);

struct GridPoint {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const GridPoint&, const GridPoint&) = default;
};

/// Points of the n x n grid (or the n x n torus), kept in insertion order.
struct GridSubset {
  int n = 0;
  Geometry geometry = Geometry::planar;
  std::vector<GridPoint> points;

  std::size_t size() const { return points.size(); }
};

/// Squared distance; on the torus each coordinate displacement is folded to
/// min(|d|, n - |d|) before squaring.
long long squared_distance(GridPoint a, GridPoint b, int n, Geometry geometry);

/// All grid points in row-major order: (0,0), (0,1), ..., (0,n-1), (1,0), ...
std::vector<GridPoint> grid_points(int n);

/// True iff no three distinct points have two equal pairwise squared
/// distances (collinear three-term progressions included).
/// Throws ValidationError for out-of-range or duplicate points.
bool verify_noiso(const GridSubset& s);

/// Exact maximum isosceles-free subset size by exhaustive search; n <= 4.
int max_noiso_bruteforce(int n, Geometry geometry = Geometry::planar);

/// Adds points in descending priority (row-major tie-break), skipping any
/// point that would close an isosceles triple. The result is maximal.
GridSubset noiso_greedy_solve(int n, const PriorityOracle& priority,
                              Geometry geometry = Geometry::planar);

/// Starts from the full grid and removes points in descending priority,
/// stopping as soon as the remainder is isosceles-free. Not maximal in general.
GridSubset noiso_removal_solve(int n, const PriorityOracle& priority,
                               Geometry geometry = Geometry::planar);

enum class SymmetryGroup {
  axes4,   ///< flips over the central vertical and horizontal axes
  diag2,   ///< flip over x = y
  diags4,  ///< flips over x = y and the anti-diagonal x + y = n - 1
};

std::string to_string(SymmetryGroup g);
std::optional<SymmetryGroup> parse_symmetry_group(const std::string& name);

int group_order(SymmetryGroup g);
/// Image of `p` under the `element`-th group element (element 0 is identity).
GridPoint apply_symmetry(GridPoint p, int n, SymmetryGroup g, int element);
/// Distinct images of `p`, sorted.
std::vector<GridPoint> orbit(GridPoint p, int n, SymmetryGroup g);
/// axes4: x,y < ceil(n/2); diag2: x <= y; diags4: x <= y and x + y <= n - 1.
bool in_fundamental_domain(GridPoint p, int n, SymmetryGroup g);

/// Adds whole orbits at a time, ranked by the priority of their
/// fundamental-domain representative. An orbit is skipped when any of its
/// points, including triples inside the orbit itself, would break the
/// constraint. The result is invariant under `group`.
GridSubset noiso_symmetric_solve(int n, const PriorityOracle& priority, SymmetryGroup group,
                                 Geometry geometry = Geometry::planar);

/// Suggests the next point given the current set.
using PointChooser = std::function<GridPoint(const GridSubset& current)>;

struct NextPointOutcome {
  GridSubset subset;
  int chooser_calls = 0;
  int rejected = 0;
};

/// Calls `chooser` at most `budget` times. Suggestions that repeat, leave the
/// grid or close an isosceles triple are skipped but still use budget.
/// Chooser exceptions become EvaluationError.
NextPointOutcome noiso_nextpoint_solve(int n, const PointChooser& chooser, int budget,
                                       Geometry geometry = Geometry::planar);

/// Chooser that proposes points in descending priority, skipping ones
/// already present. Each returned chooser keeps its own cursor.
PointChooser chooser_from_priority(const PriorityOracle& priority, int n);

}  // namespace funsearch::kernels
