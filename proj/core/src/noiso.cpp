#include "funsearch/noiso.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <set>
#include <unordered_map>

#include "funsearch/errors.hpp"

namespace funsearch::kernels {

namespace {

constexpr int kMaxGridSide = 1024;
// The removal solver starts from all n^2 points, each with a distance histogram.
constexpr int kMaxRemovalSide = 100;

void check_side(int n) {
  if (n < 1) throw ValidationError("grid side must be >= 1, got " + std::to_string(n));
  if (n > kMaxGridSide) {
    throw CapacityError("grid side " + std::to_string(n) + " exceeds limit " +
                        std::to_string(kMaxGridSide));
  }
}

int fold(int d, int n, Geometry geometry) {
  d = std::abs(d);
  return geometry == Geometry::torus ? std::min(d, n - d) : d;
}

// Maintains, for a point set S on the grid, the number of (apex, unordered
// pair) incidences with equal apex distances. S is isosceles-free iff this
// count is zero. Distances are interned into dense class ids.
class IsoscelesTracker {
 public:
  IsoscelesTracker(int n, Geometry geometry)
      : n_(n), geometry_(geometry), cell_member_(static_cast<std::size_t>(n) * n, 0) {
    const int span = geometry == Geometry::torus ? n / 2 + 1 : n;
    class_of_.assign(static_cast<std::size_t>(span) * span, -1);
    std::vector<long long> values;
    for (int dx = 0; dx < span; ++dx) {
      for (int dy = 0; dy < span; ++dy) values.push_back(1LL * dx * dx + 1LL * dy * dy);
    }
    std::vector<long long> distinct(values);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (std::size_t i = 0; i < values.size(); ++i) {
      class_of_[i] = static_cast<int>(
          std::lower_bound(distinct.begin(), distinct.end(), values[i]) - distinct.begin());
    }
    span_ = span;
    classes_ = static_cast<int>(distinct.size());
    hist_.resize(cell_member_.size());
    stamp_.assign(classes_, 0);
  }

  int n() const { return n_; }
  std::size_t size() const { return members_.size(); }
  bool contains(GridPoint p) const { return cell_member_[cell(p)] != 0; }
  bool isosceles_free() const { return incidences_ == 0; }
  const std::vector<GridPoint>& members() const { return members_; }

  bool would_create(GridPoint c) {
    ++epoch_;
    for (const GridPoint& a : members_) {
      const int d = distance_class(a, c);
      if (stamp_[d] == epoch_) return true;  // apex c
      stamp_[d] = epoch_;
      if (hist_[cell(a)][d] > 0) return true;  // apex a
    }
    return false;
  }

  void add(GridPoint c) {
    auto& own = hist_[cell(c)];
    own.assign(classes_, 0);
    for (const GridPoint& a : members_) {
      const int d = distance_class(a, c);
      incidences_ += hist_[cell(a)][d]++;
      incidences_ += own[d]++;
    }
    cell_member_[cell(c)] = 1;
    members_.push_back(c);
  }

  void remove(GridPoint c) {
    auto it = std::find(members_.begin(), members_.end(), c);
    members_.erase(it);
    cell_member_[cell(c)] = 0;
    auto& own = hist_[cell(c)];
    for (const GridPoint& a : members_) {
      const int d = distance_class(a, c);
      incidences_ -= --hist_[cell(a)][d];
      incidences_ -= --own[d];
    }
    std::vector<std::uint16_t>().swap(own);
  }

 private:
  std::size_t cell(GridPoint p) const { return static_cast<std::size_t>(p.x) * n_ + p.y; }

  int distance_class(GridPoint a, GridPoint b) const {
    const int dx = fold(a.x - b.x, n_, geometry_);
    const int dy = fold(a.y - b.y, n_, geometry_);
    return class_of_[static_cast<std::size_t>(dx) * span_ + dy];
  }

  int n_;
  Geometry geometry_;
  int span_ = 0;
  int classes_ = 0;
  std::vector<int> class_of_;
  std::vector<char> cell_member_;
  std::vector<std::vector<std::uint16_t>> hist_;
  std::vector<GridPoint> members_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  long long incidences_ = 0;
};

std::vector<std::vector<int>> as_elements(const std::vector<GridPoint>& pts) {
  std::vector<std::vector<int>> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back({p.x, p.y});
  return out;
}

bool in_grid(GridPoint p, int n) { return p.x >= 0 && p.y >= 0 && p.x < n && p.y < n; }

}  // namespace

std::string to_string(Geometry g) { return g == Geometry::torus ? "torus" : "planar"; }

std::optional<Geometry> parse_geometry(const std::string& name) {
  if (name == "planar") return Geometry::planar;
  if (name == "torus") return Geometry::torus;
  return std::nullopt;
}

long long squared_distance(GridPoint a, GridPoint b, int n, Geometry geometry) {
  const long long dx = fold(a.x - b.x, n, geometry);
  const long long dy = fold(a.y - b.y, n, geometry);
  return dx * dx + dy * dy;
}

std::vector<GridPoint> grid_points(int n) {
  std::vector<GridPoint> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) out.push_back({x, y});
  }
  return out;
}

bool verify_noiso(const GridSubset& s) {
  if (s.n < 1) throw ValidationError("grid side must be >= 1");
  std::set<GridPoint> seen;
  for (const auto& p : s.points) {
    if (!in_grid(p, s.n)) {
      throw ValidationError("point (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                            ") outside the " + std::to_string(s.n) + "x" + std::to_string(s.n) +
                            " grid");
    }
    if (!seen.insert(p).second) {
      throw ValidationError("duplicate point (" + std::to_string(p.x) + "," +
                            std::to_string(p.y) + ")");
    }
  }
  // Any two of the three sides share a vertex, so it suffices to look for an
  // apex with two other points at equal distance.
  std::unordered_map<long long, int> at_distance;
  for (const auto& apex : s.points) {
    at_distance.clear();
    for (const auto& other : s.points) {
      if (other == apex) continue;
      if (++at_distance[squared_distance(apex, other, s.n, s.geometry)] > 1) return false;
    }
  }
  return true;
}

int max_noiso_bruteforce(int n, Geometry geometry) {
  if (n < 1) throw ValidationError("grid side must be >= 1");
  if (n > 4) {
    throw CapacityError("exhaustive no-isosceles search supports n <= 4, got " + std::to_string(n));
  }
  const auto pts = grid_points(n);
  IsoscelesTracker tracker(n, geometry);
  int best = 0;
  std::function<void(std::size_t)> search = [&](std::size_t i) {
    const int here = static_cast<int>(tracker.size());
    if (here + static_cast<int>(pts.size() - i) <= best) return;
    if (i == pts.size()) {
      best = here;
      return;
    }
    if (!tracker.would_create(pts[i])) {
      tracker.add(pts[i]);
      search(i + 1);
      tracker.remove(pts[i]);
    }
    search(i + 1);
  };
  search(0);
  return best;
}

GridSubset noiso_greedy_solve(int n, const PriorityOracle& priority, Geometry geometry) {
  check_side(n);
  const auto pts = grid_points(n);
  const auto order = priority_order(n, as_elements(pts), priority);
  IsoscelesTracker tracker(n, geometry);
  for (std::size_t idx : order) {
    if (!tracker.would_create(pts[idx])) tracker.add(pts[idx]);
  }
  return GridSubset{n, geometry, tracker.members()};
}

GridSubset noiso_removal_solve(int n, const PriorityOracle& priority, Geometry geometry) {
  check_side(n);
  if (n > kMaxRemovalSide) {
    throw CapacityError("removal solver supports n <= " + std::to_string(kMaxRemovalSide));
  }
  const auto pts = grid_points(n);
  const auto order = priority_order(n, as_elements(pts), priority);
  IsoscelesTracker tracker(n, geometry);
  for (const auto& p : pts) tracker.add(p);
  for (std::size_t idx : order) {
    if (tracker.isosceles_free()) break;
    tracker.remove(pts[idx]);
  }
  // Report the survivors in row-major order.
  std::vector<GridPoint> survivors(tracker.members());
  std::sort(survivors.begin(), survivors.end());
  return GridSubset{n, geometry, std::move(survivors)};
}

std::string to_string(SymmetryGroup g) {
  switch (g) {
    case SymmetryGroup::axes4: return "axes4";
    case SymmetryGroup::diag2: return "diag2";
    case SymmetryGroup::diags4: return "diags4";
  }
  return "?";
}

std::optional<SymmetryGroup> parse_symmetry_group(const std::string& name) {
  if (name == "axes4") return SymmetryGroup::axes4;
  if (name == "diag2") return SymmetryGroup::diag2;
  if (name == "diags4") return SymmetryGroup::diags4;
  return std::nullopt;
}

int group_order(SymmetryGroup g) { return g == SymmetryGroup::diag2 ? 2 : 4; }

GridPoint apply_symmetry(GridPoint p, int n, SymmetryGroup g, int element) {
  const int m = n - 1;
  switch (g) {
    case SymmetryGroup::axes4:
      switch (element) {
        case 0: return p;
        case 1: return {m - p.x, p.y};
        case 2: return {p.x, m - p.y};
        case 3: return {m - p.x, m - p.y};
      }
      break;
    case SymmetryGroup::diag2:
      switch (element) {
        case 0: return p;
        case 1: return {p.y, p.x};
      }
      break;
    case SymmetryGroup::diags4:
      switch (element) {
        case 0: return p;
        case 1: return {p.y, p.x};
        case 2: return {m - p.y, m - p.x};
        case 3: return {m - p.x, m - p.y};
      }
      break;
  }
  throw ValidationError("group element " + std::to_string(element) + " out of range for " +
                        to_string(g));
}

std::vector<GridPoint> orbit(GridPoint p, int n, SymmetryGroup g) {
  std::vector<GridPoint> out;
  for (int e = 0; e < group_order(g); ++e) out.push_back(apply_symmetry(p, n, g, e));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool in_fundamental_domain(GridPoint p, int n, SymmetryGroup g) {
  switch (g) {
    case SymmetryGroup::axes4: {
      const int half = (n + 1) / 2;
      return p.x < half && p.y < half;
    }
    case SymmetryGroup::diag2:
      return p.x <= p.y;
    case SymmetryGroup::diags4:
      return p.x <= p.y && p.x + p.y <= n - 1;
  }
  return false;
}

GridSubset noiso_symmetric_solve(int n, const PriorityOracle& priority, SymmetryGroup group,
                                 Geometry geometry) {
  check_side(n);
  std::vector<GridPoint> reps;
  std::set<GridPoint> covered;
  for (const auto& p : grid_points(n)) {
    if (!in_fundamental_domain(p, n, group) || covered.count(p)) continue;
    for (const auto& q : orbit(p, n, group)) covered.insert(q);
    reps.push_back(p);
  }
  const auto order = priority_order(n, as_elements(reps), priority);
  IsoscelesTracker tracker(n, geometry);
  for (std::size_t idx : order) {
    const auto members = orbit(reps[idx], n, group);
    std::size_t added = 0;
    for (const auto& q : members) {
      if (tracker.would_create(q)) break;
      tracker.add(q);
      ++added;
    }
    if (added != members.size()) {
      for (std::size_t i = 0; i < added; ++i) tracker.remove(members[i]);
    }
  }
  return GridSubset{n, geometry, tracker.members()};
}

NextPointOutcome noiso_nextpoint_solve(int n, const PointChooser& chooser, int budget,
                                       Geometry geometry) {
  check_side(n);
  if (budget < 1) throw ValidationError("next-point budget must be >= 1");
  NextPointOutcome out;
  out.subset = GridSubset{n, geometry, {}};
  IsoscelesTracker tracker(n, geometry);
  for (int call = 0; call < budget; ++call) {
    GridPoint p;
    try {
      p = chooser(out.subset);
    } catch (const std::exception& e) {
      throw EvaluationError(std::string("point chooser failed: ") + e.what());
    }
    ++out.chooser_calls;
    if (!in_grid(p, n) || tracker.contains(p) || tracker.would_create(p)) {
      ++out.rejected;
      continue;
    }
    tracker.add(p);
    out.subset.points.push_back(p);
  }
  return out;
}

PointChooser chooser_from_priority(const PriorityOracle& priority, int n) {
  check_side(n);
  auto pts = std::make_shared<std::vector<GridPoint>>(grid_points(n));
  std::vector<GridPoint> ordered;
  for (std::size_t idx : priority_order(n, as_elements(*pts), priority)) ordered.push_back((*pts)[idx]);
  *pts = std::move(ordered);
  auto cursor = std::make_shared<std::size_t>(0);
  return [pts, cursor](const GridSubset& current) -> GridPoint {
    while (*cursor < pts->size()) {
      const GridPoint p = (*pts)[(*cursor)++];
      if (std::find(current.points.begin(), current.points.end(), p) == current.points.end()) {
        return p;
      }
    }
    return {-1, -1};
  };
}

}  // namespace funsearch::kernels
