#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace funsearch::safety {

/// Static screening rules for generated guest code.
struct SafetyPolicy {
  std::set<std::string> allow_imports;
  std::set<std::string> forbid_tokens;
  std::size_t max_len = 20000;

  /// math, itertools, functools, collections, random, typing, numpy and the
  /// harness module `funsearch`; eval, exec, open, compile, __import__,
  /// system, popen, spawn, socket, connect, remove, rmdir, unlink, fork, kill.
  static SafetyPolicy defaults();
  /// {allow_imports:[...], forbid_tokens:[...], max_len}; missing keys keep
  /// their defaults. Throws ConfigError when the two sets overlap.
  static SafetyPolicy from_json(const nlohmann::json& j);
  static SafetyPolicy load(const std::string& path);

  nlohmann::json to_json() const;
};

enum class Rule { import, forbidden_call, dunder_attribute, length };

std::string to_string(Rule r);

struct Violation {
  Rule rule;
  std::string token;
  int line = 0;
  int column = 0;

  std::string describe() const;
};

/// Pure lexical screen. Returns the first violation in source order, or
/// nullopt when the code passes.
std::optional<Violation> screen(std::string_view code, const SafetyPolicy& policy);

}  // namespace funsearch::safety
