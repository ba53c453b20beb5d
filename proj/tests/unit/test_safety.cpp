#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "funsearch/errors.hpp"
#include "funsearch/pylex.hpp"
#include "funsearch/safety.hpp"

using namespace funsearch;
using namespace funsearch::safety;

namespace {

std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(FUNSEARCH_FIXTURE_DIR) + "/" + name);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kPriority = "def priority(n):\n  x = n + 1\n  return x > 2\n";

}  // namespace

TEST_CASE("tokenizer basics") {
  const auto toks = pylex::tokenize("x = 'eval(1)'  # open(f)\nf\"{a.b}\"\n");
  std::vector<std::string> texts;
  for (const auto& t : toks) texts.emplace_back(t.text);
  CHECK(toks[0].kind == pylex::TokenKind::name);
  CHECK(toks[2].kind == pylex::TokenKind::string);
  CHECK(toks[3].kind == pylex::TokenKind::comment);
  CHECK(std::find(texts.begin(), texts.end(), "b") != texts.end());
  // Never throws on garbage.
  CHECK_NOTHROW(pylex::tokenize("'''unterminated \\"));
}

TEST_CASE("the sample spec passes") {
  CHECK_FALSE(screen(read_fixture("prime_spec.py"), SafetyPolicy::defaults()).has_value());
}

TEST_CASE("imports outside the allowlist") {
  const auto v = screen("import math\nimport os\n", SafetyPolicy::defaults());
  REQUIRE(v);
  CHECK(v->rule == Rule::import);
  CHECK(v->token == "os");
  CHECK(v->line == 2);
  CHECK(screen("from subprocess import run\n", SafetyPolicy::defaults())->rule == Rule::import);
  CHECK(screen("import numpy.linalg as la\n", SafetyPolicy::defaults()) == std::nullopt);
  CHECK(screen("from . import x\n", SafetyPolicy::defaults())->rule == Rule::import);
  CHECK(screen("import math, os\n", SafetyPolicy::defaults())->token == "os");
}

TEST_CASE("forbidden calls only in call position") {
  const auto policy = SafetyPolicy::defaults();
  for (const auto& tok : policy.forbid_tokens) {
    const std::string code = "def priority(n):\n  y = " + tok + "(n)\n  return y\n";
    const auto v = screen(code, policy);
    REQUIRE_MESSAGE(v, tok);
    CHECK(v->rule == Rule::forbidden_call);
    CHECK(v->token == tok);
    CHECK(v->line == 2);
  }
  CHECK_FALSE(screen("s = 'eval(x)'\n", policy).has_value());
  CHECK_FALSE(screen("# exec(x)\n", policy).has_value());
  CHECK_FALSE(screen("kill_count = 3\n", policy).has_value());
  CHECK(screen("os.system ('ls')\n", policy)->rule == Rule::forbidden_call);
}

TEST_CASE("dunder attributes and length") {
  const auto policy = SafetyPolicy::defaults();
  CHECK(screen("x = ().__class__\n", policy)->rule == Rule::dunder_attribute);
  SafetyPolicy small = policy;
  small.max_len = 10;
  CHECK(screen(kPriority, small)->rule == Rule::length);
}

TEST_CASE("policy JSON") {
  const auto p = SafetyPolicy::from_json(nlohmann::json::parse(R"({"allow_imports":["math"],"max_len":50})"));
  CHECK(p.allow_imports == std::set<std::string>{"math"});
  CHECK(p.max_len == 50);
  CHECK(p.forbid_tokens == SafetyPolicy::defaults().forbid_tokens);
  CHECK_THROWS_AS(SafetyPolicy::from_json(nlohmann::json::parse(R"({"allow_imports":["eval"]})")), ConfigError);
  CHECK(SafetyPolicy::from_json(p.to_json()).allow_imports == p.allow_imports);
}

TEST_CASE("screen survives random mutations") {
  const std::string base = read_fixture("prime_spec.py");
  const std::string alphabet = "abc_()[]{}'\"#\\\n .:=+-*/%0123456789@ufrb";
  std::mt19937_64 rng(3);
  const auto policy = SafetyPolicy::defaults();
  for (int i = 0; i < 10000; ++i) {
    std::string s = base;
    const int edits = 1 + static_cast<int>(rng() % 6);
    for (int e = 0; e < edits; ++e) {
      const std::size_t pos = rng() % (s.size() + 1);
      switch (rng() % 3) {
        case 0: s.insert(pos, 1, alphabet[rng() % alphabet.size()]); break;
        case 1:
          if (pos < s.size()) s.erase(pos, 1);
          break;
        default:
          if (pos < s.size()) s[pos] = alphabet[rng() % alphabet.size()];
      }
    }
    std::optional<Violation> v;
    REQUIRE_NOTHROW(v = screen(s, policy));
    if (v) {
      CHECK(v->line >= 1);
      CHECK(v->column >= 1);
      CHECK_FALSE(to_string(v->rule).empty());
    }
  }
}
