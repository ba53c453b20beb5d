#include "funsearch/construction.hpp"

#include "funsearch/errors.hpp"

namespace funsearch {

using nlohmann::json;

std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::capset: return "capset";
    case ProblemKind::nat: return "nat";
    case ProblemKind::noiso: return "noiso";
    case ProblemKind::custom: return "custom";
  }
  return "custom";
}

std::optional<ProblemKind> parse_problem_kind(const std::string& name) {
  if (name == "capset") return ProblemKind::capset;
  if (name == "nat") return ProblemKind::nat;
  if (name == "noiso") return ProblemKind::noiso;
  if (name == "custom") return ProblemKind::custom;
  return std::nullopt;
}

std::string to_string(ScoreRule r) {
  switch (r) {
    case ScoreRule::size: return "size";
    case ScoreRule::neg_size: return "neg_size";
    case ScoreRule::size_over_n: return "size_over_n";
  }
  return "size";
}

std::optional<ScoreRule> parse_score_rule(const std::string& name) {
  if (name == "size") return ScoreRule::size;
  if (name == "neg_size") return ScoreRule::neg_size;
  if (name == "size_over_n") return ScoreRule::size_over_n;
  return std::nullopt;
}

ProblemKind problem_of(const Construction& c) {
  switch (c.index()) {
    case 0: return ProblemKind::capset;
    case 1: return ProblemKind::nat;
    default: return ProblemKind::noiso;
  }
}

json to_json(const Construction& c, std::optional<std::int64_t> bound) {
  json j;
  j["problem"] = to_string(problem_of(c));
  if (const auto* cap = std::get_if<kernels::CapSetInstance>(&c)) {
    j["n"] = cap->n;
    j["elements"] = cap->points;
  } else if (const auto* tuple = std::get_if<kernels::AdmissibleTuple>(&c)) {
    if (bound) j["n"] = *bound;
    j["elements"] = tuple->entries();
  } else {
    const auto& grid = std::get<kernels::GridSubset>(c);
    j["n"] = grid.n;
    j["geometry"] = kernels::to_string(grid.geometry);
    json pts = json::array();
    for (const auto& p : grid.points) pts.push_back({p.x, p.y});
    j["elements"] = std::move(pts);
  }
  return j;
}

ConstructionRecord construction_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ValidationError("construction must be a JSON object");
    const auto problem = parse_problem_kind(j.at("problem").get<std::string>());
    if (!problem || *problem == ProblemKind::custom) {
      throw ValidationError("unknown construction problem '" + j.at("problem").dump() + "'");
    }
    const json& elements = j.at("elements");
    if (!elements.is_array()) throw ValidationError("'elements' must be an array");
    switch (*problem) {
      case ProblemKind::capset: {
        kernels::CapSetInstance inst;
        inst.n = j.at("n").get<int>();
        inst.points = elements.get<std::vector<std::vector<int>>>();
        return {inst, std::nullopt};
      }
      case ProblemKind::nat: {
        std::optional<std::int64_t> bound;
        if (j.contains("n")) bound = j.at("n").get<std::int64_t>();
        return {kernels::AdmissibleTuple(elements.get<std::vector<std::int64_t>>()), bound};
      }
      default: {
        kernels::GridSubset grid;
        grid.n = j.at("n").get<int>();
        if (j.contains("geometry")) {
          const auto g = kernels::parse_geometry(j.at("geometry").get<std::string>());
          if (!g) throw ValidationError("unknown geometry " + j.at("geometry").dump());
          grid.geometry = *g;
        }
        for (const auto& p : elements) {
          if (!p.is_array() || p.size() != 2) throw ValidationError("grid points must be [x,y] pairs");
          grid.points.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
        }
        return {grid, std::nullopt};
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed construction: ") + e.what());
  }
}

VerifyReport verify_construction(const ConstructionRecord& record) {
  VerifyReport report;
  report.problem = problem_of(record.value);
  try {
    if (const auto* cap = std::get_if<kernels::CapSetInstance>(&record.value)) {
      report.size = cap->size();
      report.valid = kernels::verify_capset(*cap);
      if (!report.valid) report.message = "three vectors sum to zero";
    } else if (const auto* tuple = std::get_if<kernels::AdmissibleTuple>(&record.value)) {
      report.size = tuple->k();
      report.diameter = tuple->diameter();
      report.valid = kernels::verify_admissible(*tuple);
      if (!report.valid) {
        report.message = "tuple covers every residue class of some prime";
      } else if (record.bound && tuple->k() > 0 && tuple->entries().back() > *record.bound) {
        report.valid = false;
        report.message = "tuple leaves [0, n]";
      }
    } else {
      const auto& grid = std::get<kernels::GridSubset>(record.value);
      report.size = grid.size();
      report.valid = kernels::verify_noiso(grid);
      if (!report.valid) report.message = "isosceles triple present";
    }
  } catch (const ValidationError& e) {
    report.valid = false;
    report.message = e.what();
  }
  return report;
}

double score_construction(const Construction& c, ScoreRule rule) {
  double size = 0.0;
  double n = 1.0;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, kernels::AdmissibleTuple>) {
          size = static_cast<double>(v.k());
        } else {
          size = static_cast<double>(v.size());
          n = v.n;
        }
      },
      c);
  switch (rule) {
    case ScoreRule::size: return size;
    case ScoreRule::neg_size: return -size;
    case ScoreRule::size_over_n: return size / n;
  }
  return size;
}

}  // namespace funsearch
