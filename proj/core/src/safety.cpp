#include "funsearch/safety.hpp"

#include <fstream>
#include <vector>

#include "funsearch/errors.hpp"
#include "funsearch/pylex.hpp"

namespace funsearch::safety {

using pylex::Token;
using pylex::TokenKind;

SafetyPolicy SafetyPolicy::defaults() {
  SafetyPolicy p;
  p.allow_imports = {"math", "itertools", "functools", "collections", "random",
                     "typing", "numpy", "funsearch"};
  p.forbid_tokens = {"eval", "exec",   "open",   "compile", "__import__",
                     "system", "popen", "spawn", "socket",  "connect",
                     "remove", "rmdir", "unlink", "fork",   "kill"};
  p.max_len = 20000;
  return p;
}

SafetyPolicy SafetyPolicy::from_json(const nlohmann::json& j) {
  SafetyPolicy p = defaults();
  try {
    if (j.contains("allow_imports")) p.allow_imports = j.at("allow_imports").get<std::set<std::string>>();
    if (j.contains("forbid_tokens")) p.forbid_tokens = j.at("forbid_tokens").get<std::set<std::string>>();
    if (j.contains("max_len")) p.max_len = j.at("max_len").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed safety policy: ") + e.what());
  }
  for (const auto& name : p.allow_imports) {
    if (p.forbid_tokens.count(name)) {
      throw ConfigError("safety policy lists '" + name + "' as both allowed and forbidden");
    }
  }
  return p;
}

SafetyPolicy SafetyPolicy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open safety policy " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("safety policy " + path + ": " + e.what());
  }
}

nlohmann::json SafetyPolicy::to_json() const {
  return {{"allow_imports", allow_imports}, {"forbid_tokens", forbid_tokens}, {"max_len", max_len}};
}

std::string to_string(Rule r) {
  switch (r) {
    case Rule::import: return "import";
    case Rule::forbidden_call: return "forbidden_call";
    case Rule::dunder_attribute: return "dunder_attribute";
    case Rule::length: return "length";
  }
  return "?";
}

std::string Violation::describe() const {
  return to_string(rule) + " '" + token + "' at line " + std::to_string(line) + ", column " +
         std::to_string(column);
}

namespace {

bool is_code(const Token& t) { return t.kind != TokenKind::comment; }

// Checks the module list that follows `import` or `from`, starting at i.
std::optional<Violation> check_import(const std::vector<Token>& toks, std::size_t i,
                                      const SafetyPolicy& policy) {
  const Token& kw = toks[i];
  auto module_root = [&](std::size_t j, std::size_t& next) -> std::optional<Token> {
    while (j < toks.size() && toks[j].kind == TokenKind::comment) ++j;
    if (j >= toks.size() || toks[j].kind != TokenKind::name) {
      next = j;
      return std::nullopt;
    }
    const Token root = toks[j];
    ++j;
    while (j + 1 < toks.size() && toks[j].text == "." && toks[j + 1].kind == TokenKind::name) j += 2;
    next = j;
    return root;
  };
  auto violation = [&](const Token& t) {
    return Violation{Rule::import, std::string(t.text), t.line, t.column};
  };

  std::size_t j = i + 1;
  if (kw.text == "from") {
    if (j < toks.size() && (toks[j].text == "." || toks[j].text == "...")) return violation(toks[j]);
    std::size_t next = j;
    auto root = module_root(j, next);
    if (!root) return violation(kw);
    if (!policy.allow_imports.count(std::string(root->text))) return violation(*root);
    return std::nullopt;
  }
  bool parenthesised = false;
  while (j < toks.size()) {
    if (toks[j].text == "(") {
      parenthesised = true;
      ++j;
      continue;
    }
    std::size_t next = j;
    auto root = module_root(j, next);
    if (!root) return violation(kw);
    if (!policy.allow_imports.count(std::string(root->text))) return violation(*root);
    j = next;
    if (j + 1 < toks.size() && toks[j].text == "as") j += 2;
    if (j < toks.size() && toks[j].text == ",") {
      ++j;
      continue;
    }
    if (parenthesised && j < toks.size() && toks[j].kind == TokenKind::newline) {
      ++j;
      continue;
    }
    break;
  }
  return std::nullopt;
}

}  // namespace

std::optional<Violation> screen(std::string_view code, const SafetyPolicy& policy) {
  if (code.size() > policy.max_len) {
    int line = 1;
    for (std::size_t i = 0; i < policy.max_len; ++i) line += code[i] == '\n';
    return Violation{Rule::length, std::to_string(code.size()) + " chars", line, 1};
  }
  const auto toks = pylex::tokenize(code);
  // Nearest preceding code token, ignoring comments.
  const Token* prev = nullptr;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const Token& t = toks[i];
    if (!is_code(t)) continue;
    if (t.kind == TokenKind::name) {
      const bool statement_start = prev == nullptr || prev->kind == TokenKind::newline ||
                                   prev->text == ";" || prev->text == ":";
      if ((t.text == "import" || (t.text == "from" && statement_start))) {
        if (auto v = check_import(toks, i, policy)) return v;
      }
      if (prev != nullptr && prev->text == "." && t.text.substr(0, 2) == "__") {
        return Violation{Rule::dunder_attribute, std::string(t.text), t.line, t.column};
      }
      std::size_t j = i + 1;
      while (j < toks.size() && toks[j].kind == TokenKind::comment) ++j;
      if (j < toks.size() && toks[j].text == "(" && policy.forbid_tokens.count(std::string(t.text))) {
        return Violation{Rule::forbidden_call, std::string(t.text), t.line, t.column};
      }
    }
    prev = &t;
  }
  return std::nullopt;
}

}  // namespace funsearch::safety
