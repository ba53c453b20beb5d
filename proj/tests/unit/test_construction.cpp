#include <doctest.h>

#include "funsearch/construction.hpp"
#include "funsearch/errors.hpp"

using namespace funsearch;
using nlohmann::json;

TEST_CASE("construction JSON round trip") {
  const Construction cap = kernels::CapSetInstance{2, {{0, 0}, {1, 1}}};
  const auto j = to_json(cap);
  CHECK(j == json::parse(R"({"problem":"capset","n":2,"elements":[[0,0],[1,1]]})"));
  const auto back = construction_from_json(j);
  CHECK(problem_of(back.value) == ProblemKind::capset);

  const Construction grid = kernels::GridSubset{4, kernels::Geometry::torus, {{0, 1}, {2, 3}}};
  const auto g = to_json(grid);
  CHECK(g["geometry"] == "torus");
  CHECK(g["elements"] == json::parse("[[0,1],[2,3]]"));
  const auto gb = construction_from_json(g);
  CHECK(std::get<kernels::GridSubset>(gb.value).geometry == kernels::Geometry::torus);
}

TEST_CASE("construction schema errors") {
  CHECK_THROWS_AS(construction_from_json(json::parse(R"({"problem":"knapsack","elements":[]})")), ValidationError);
  CHECK_THROWS_AS(construction_from_json(json::parse(R"({"problem":"capset","elements":[]})")), ValidationError);
  CHECK_THROWS_AS(construction_from_json(json::parse(R"({"problem":"nat","elements":[2,1]})")), ValidationError);
  CHECK_THROWS_AS(construction_from_json(json::parse("[1,2]")), ValidationError);
}

TEST_CASE("verify_construction reports") {
  auto nat = [](const char* text) { return verify_construction(construction_from_json(json::parse(text))); };
  const auto good = nat(R"({"problem":"nat","elements":[0,2,6]})");
  CHECK(good.valid);
  CHECK(good.diameter == 6);
  CHECK(good.size == 3);
  CHECK_FALSE(nat(R"({"problem":"nat","elements":[0,2,4]})").valid);
  CHECK(nat(R"({"problem":"nat","n":6,"elements":[0,2,6]})").valid);
  CHECK_FALSE(nat(R"({"problem":"nat","n":5,"elements":[0,2,6]})").valid);

  const auto zero_sum = verify_construction(
      construction_from_json(json::parse(R"({"problem":"capset","n":1,"elements":[[0],[1],[2]]})")));
  CHECK_FALSE(zero_sum.valid);
  // Out-of-range coordinates are reported as invalid rather than thrown.
  const auto bad = verify_construction(
      construction_from_json(json::parse(R"({"problem":"noiso","n":2,"elements":[[0,5]]})")));
  CHECK_FALSE(bad.valid);
  CHECK_FALSE(bad.message.empty());
}

TEST_CASE("score rules") {
  const Construction grid = kernels::GridSubset{4, kernels::Geometry::planar, {{0, 0}, {1, 0}, {3, 0}}};
  CHECK(score_construction(grid, ScoreRule::size) == 3.0);
  CHECK(score_construction(grid, ScoreRule::neg_size) == -3.0);
  CHECK(score_construction(grid, ScoreRule::size_over_n) == doctest::Approx(0.75));
  CHECK(parse_score_rule("neg_size") == ScoreRule::neg_size);
  CHECK_FALSE(parse_problem_kind("x").has_value());
}
