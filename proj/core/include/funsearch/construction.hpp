#pragma once

#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "funsearch/admissible.hpp"
#include "funsearch/capset.hpp"
#include "funsearch/noiso.hpp"

namespace funsearch {

/// Which built-in problem a run targets; `custom` disables verification.
enum class ProblemKind { capset, nat, noiso, custom };

std::string to_string(ProblemKind k);
std::optional<ProblemKind> parse_problem_kind(const std::string& name);

/// How a construction maps to the score its candidate should report.
enum class ScoreRule {
  size,         ///< number of elements
  neg_size,     ///< -size, for the small-maximal objective
  size_over_n,  ///< size / n, for multi-n grid training
};

std::string to_string(ScoreRule r);
std::optional<ScoreRule> parse_score_rule(const std::string& name);

using Construction =
    std::variant<kernels::CapSetInstance, kernels::AdmissibleTuple, kernels::GridSubset>;

/// A construction plus the optional diameter bound carried by tuple files.
struct ConstructionRecord {
  Construction value;
  std::optional<std::int64_t> bound;
};

ProblemKind problem_of(const Construction& c);

/// {problem, n, geometry?, elements:[...]}; vectors as arrays, grid points as [x,y].
nlohmann::json to_json(const Construction& c, std::optional<std::int64_t> bound = std::nullopt);
/// Throws ValidationError on schema problems.
ConstructionRecord construction_from_json(const nlohmann::json& j);

struct VerifyReport {
  ProblemKind problem = ProblemKind::custom;
  bool valid = false;
  std::size_t size = 0;
  std::optional<std::int64_t> diameter;
  std::string message;
};

/// Runs the matching native verifier (never throws for well-typed input).
VerifyReport verify_construction(const ConstructionRecord& record);

/// Score the construction earns under `rule`.
double score_construction(const Construction& c, ScoreRule rule);

}  // namespace funsearch
