#include "funsearch/generalize.hpp"

#include <cmath>
#include <map>
#include <regex>
#include <sstream>

#include "funsearch/errors.hpp"

namespace funsearch::generalize {

using kernels::Geometry;
using kernels::GridSubset;
using nlohmann::json;

Variant Variant::parse(const std::string& text) {
  Variant v;
  if (text == "basic") return v;
  if (text == "torus") {
    v.kind = Kind::torus;
    return v;
  }
  if (text == "removal") {
    v.kind = Kind::removal;
    return v;
  }
  if (text == "smallmax") {
    v.kind = Kind::smallmax;
    return v;
  }
  if (text.rfind("symmetric:", 0) == 0) {
    auto g = kernels::parse_symmetry_group(text.substr(10));
    if (!g) throw ConfigError("unknown symmetry group in '" + text + "'");
    v.kind = Kind::symmetric;
    v.group = *g;
    return v;
  }
  if (text.rfind("nextpoint:", 0) == 0) {
    static const std::regex budget_re(R"(^([0-9]*\.?[0-9]*)n(\^2)?$)");
    std::smatch m;
    const std::string rest = text.substr(10);
    if (!std::regex_match(rest, m, budget_re)) throw ConfigError("nextpoint budget must look like 3n or n^2");
    v.kind = Kind::nextpoint;
    v.budget_scale = m[1].length() == 0 ? 1.0 : std::stod(m[1].str());
    v.budget_power = m[2].matched ? 2 : 1;
    if (!(v.budget_scale > 0)) throw ConfigError("nextpoint budget scale must be positive");
    return v;
  }
  throw ConfigError("unknown variant '" + text + "'");
}

std::string Variant::to_string() const {
  switch (kind) {
    case Kind::basic: return "basic";
    case Kind::torus: return "torus";
    case Kind::removal: return "removal";
    case Kind::smallmax: return "smallmax";
    case Kind::symmetric: return "symmetric:" + kernels::to_string(group);
    case Kind::nextpoint: {
      std::ostringstream s;
      s << "nextpoint:" << budget_scale << (budget_power == 2 ? "n^2" : "n");
      return s.str();
    }
  }
  return "basic";
}

int Variant::nextpoint_budget(int n) const {
  return std::max(1, static_cast<int>(std::ceil(budget_scale * std::pow(static_cast<double>(n), budget_power))));
}

namespace {

// Greedy outputs must also be maximal under addition.
bool maximal(const GridSubset& s) {
  std::vector<bool> present(static_cast<std::size_t>(s.n) * static_cast<std::size_t>(s.n), false);
  for (const auto& p : s.points) present[static_cast<std::size_t>(p.x) * static_cast<std::size_t>(s.n) + static_cast<std::size_t>(p.y)] = true;
  GridSubset probe = s;
  for (const auto& p : kernels::grid_points(s.n)) {
    if (present[static_cast<std::size_t>(p.x) * static_cast<std::size_t>(s.n) + static_cast<std::size_t>(p.y)]) continue;
    probe.points.push_back(p);
    const bool ok = kernels::verify_noiso(probe);
    probe.points.pop_back();
    if (ok) return false;
  }
  return true;
}

}  // namespace

std::vector<SweepRow> generalization_sweep(const OracleFactory& priority, const Variant& variant,
                                           const std::vector<int>& n_values) {
  if (n_values.empty()) throw ValidationError("generalization sweep needs at least one n");
  std::vector<SweepRow> rows;
  for (int n : n_values) {
    SweepRow row;
    row.n = n;
    try {
      if (n < 1) throw ValidationError("grid side must be >= 1");
      const auto oracle = priority(n);
      GridSubset s;
      switch (variant.kind) {
        case Variant::Kind::basic:
        case Variant::Kind::smallmax: s = kernels::noiso_greedy_solve(n, oracle); break;
        case Variant::Kind::torus: s = kernels::noiso_greedy_solve(n, oracle, Geometry::torus); break;
        case Variant::Kind::removal: s = kernels::noiso_removal_solve(n, oracle); break;
        case Variant::Kind::symmetric: s = kernels::noiso_symmetric_solve(n, oracle, variant.group); break;
        case Variant::Kind::nextpoint:
          s = kernels::noiso_nextpoint_solve(n, kernels::chooser_from_priority(oracle, n), variant.nextpoint_budget(n))
                  .subset;
          break;
      }
      row.size = static_cast<int>(s.points.size());
      row.size_over_n = static_cast<double>(row.size) / n;
      row.ok = kernels::verify_noiso(s);
      if (row.ok && variant.kind == Variant::Kind::smallmax && n <= 24) row.ok = maximal(s);
      if (!row.ok) row.error = "construction failed verification";
      row.score = variant.kind == Variant::Kind::smallmax ? -row.size : row.size;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> generalization_sweep(const kernels::PriorityOracle& priority, const Variant& variant,
                                           const std::vector<int>& n_values) {
  return generalization_sweep([&](int) { return priority; }, variant, n_values);
}

bool single_parity(const std::vector<int>& n_values) {
  if (n_values.size() < 2) return false;
  for (int n : n_values) {
    if ((n - n_values.front()) % 2 != 0) return false;
  }
  return true;
}

std::string to_csv(const std::vector<SweepRow>& rows, const Variant& variant) {
  std::ostringstream out;
  const bool smallmax = variant.kind == Variant::Kind::smallmax;
  if (smallmax) out << "# objective: score = -size of a maximal set; lower size is better\n";
  out << "n,size,size_over_n,ok" << (smallmax ? ",score" : "") << '\n';
  for (const auto& r : rows) {
    out << r.n << ',' << r.size << ',' << json(r.size_over_n).dump() << ',' << (r.ok ? "true" : "false");
    if (smallmax) out << ',' << r.score;
    out << '\n';
  }
  return out.str();
}

std::string tabulation_harness(const std::string& call) {
  return "\n\nfunsearch_construction = None\n\n\n"
         "def " + std::string(kTabulationEntry) + "(n):\n"
         "    global funsearch_construction\n"
         "    values = []\n"
         "    for x in range(n):\n"
         "        for y in range(n):\n"
         "            values.append([x, y, float(" + call + ")])\n"
         "    funsearch_construction = {\"kind\": \"priority_table\", \"n\": n, \"values\": values}\n"
         "    return len(values)\n";
}

kernels::PriorityOracle tabulate_priority(eval::Backend& backend, const std::string& source, const std::string& call,
                                          int n, double timeout_s) {
  eval::EvalRequest req;
  req.id = "tabulate-" + std::to_string(n);
  req.candidate.source = source + tabulation_harness(call);
  req.candidate.priority_source = source;
  req.entry = kTabulationEntry;
  req.inputs = json::array({n});
  req.timeout_s = timeout_s;
  const auto result = backend.evaluate(req);
  if (!result.ok() || !result.outcomes.front().construction) {
    throw EvaluationError("priority tabulation failed at n=" + std::to_string(n) + ": " + result.failure_message());
  }
  std::map<std::vector<int>, double> values;
  try {
    for (const auto& v : result.outcomes.front().construction->at("values")) {
      const double score = v.at(2).is_number() ? v.at(2).get<double>() : -std::numeric_limits<double>::infinity();
      values[{v.at(0).get<int>(), v.at(1).get<int>()}] = score;
    }
  } catch (const json::exception& e) {
    throw EvaluationError(std::string("malformed priority table: ") + e.what());
  }
  if (values.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw EvaluationError("priority table does not cover the grid");
  }
  return kernels::PriorityOracle::table(std::move(values));
}

}  // namespace funsearch::generalize
