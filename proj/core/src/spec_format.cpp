#include "funsearch/spec_format.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "funsearch/errors.hpp"
#include "funsearch/pylex.hpp"

namespace funsearch::specfmt {

namespace {

using pylex::Token;
using pylex::TokenKind;

struct Line {
  std::size_t begin;  // offset of first char
  std::size_t end;    // offset one past the last char, before '\n'
  std::size_t next;   // offset of the following line
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back({pos, text.size(), text.size()});
      break;
    }
    lines.push_back({pos, nl, nl + 1});
    pos = nl + 1;
  }
  return lines;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\f");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\f");
  return s.substr(b, e - b + 1);
}

std::string rtrim_copy(std::string_view s) {
  const auto e = s.find_last_not_of(" \t\r\n\f");
  return e == std::string_view::npos ? std::string() : std::string(s.substr(0, e + 1));
}

// Location of one top-level function inside a source buffer.
struct Block {
  std::size_t first_line;  // first decorator line, or the def line
  std::size_t def_line;
  std::size_t sig_end_line;
  std::size_t last_line;  // last non-blank line of the body
};

// Line-level view of a guest source: which lines start inside a multi-line
// string, plus the tokens of the whole buffer.
class SourceView {
 public:
  explicit SourceView(std::string_view text) : text_(text), lines_(split_lines(text)) {
    tokens_ = pylex::tokenize(text_);
    in_string_.assign(lines_.size(), 0);
    for (const auto& t : tokens_) {
      if (t.kind != TokenKind::string) continue;
      const auto newlines = std::count(t.text.begin(), t.text.end(), '\n');
      for (long k = 1; k <= newlines; ++k) {
        const std::size_t ln = static_cast<std::size_t>(t.line - 1 + k);
        if (ln < in_string_.size()) in_string_[ln] = 1;
      }
    }
  }

  std::size_t line_count() const { return lines_.size(); }
  std::string_view line(std::size_t i) const {
    return text_.substr(lines_[i].begin, lines_[i].end - lines_[i].begin);
  }
  const Line& bounds(std::size_t i) const { return lines_[i]; }
  bool in_string(std::size_t i) const { return in_string_[i] != 0; }
  bool blank(std::size_t i) const { return !in_string(i) && trim(line(i)).empty(); }
  bool top_level(std::size_t i) const {
    if (in_string(i) || blank(i)) return false;
    const char c = line(i).front();
    return c != ' ' && c != '\t';
  }
  bool top_level_comment(std::size_t i) const { return top_level(i) && line(i).front() == '#'; }
  bool is_def(std::size_t i) const {
    if (!top_level(i)) return false;
    const auto l = line(i);
    return l.substr(0, 4) == "def " || l.substr(0, 10) == "async def ";
  }
  bool is_decorator(std::size_t i) const { return top_level(i) && line(i).front() == '@'; }

  const std::vector<Token>& tokens() const { return tokens_; }
  std::string_view text() const { return text_; }

  // Line holding the ':' that closes the def header starting on `def_line`.
  std::size_t signature_end(std::size_t def_line) const {
    int depth = 0;
    for (const auto& t : tokens_) {
      if (t.line - 1 < static_cast<int>(def_line)) continue;
      if (t.kind != TokenKind::op) continue;
      if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
      if (t.text == ")" || t.text == "]" || t.text == "}") --depth;
      if (t.text == ":" && depth == 0) return static_cast<std::size_t>(t.line - 1);
    }
    throw FormatError("unterminated function header on line " + std::to_string(def_line + 1));
  }

  std::vector<Block> blocks() const {
    std::vector<Block> out;
    std::size_t i = 0;
    while (i < line_count()) {
      if (!is_decorator(i) && !is_def(i)) {
        ++i;
        continue;
      }
      Block b{};
      b.first_line = i;
      while (i < line_count() && (is_decorator(i) || blank(i) || top_level_comment(i)) && !is_def(i)) ++i;
      if (i >= line_count() || !is_def(i)) {
        throw FormatError("decorator on line " + std::to_string(b.first_line + 1) +
                          " is not followed by a function");
      }
      b.def_line = i;
      b.sig_end_line = signature_end(i);
      b.last_line = b.sig_end_line;
      std::size_t j = b.sig_end_line + 1;
      while (j < line_count()) {
        if (blank(j)) {
          ++j;
          continue;
        }
        if (top_level_comment(j)) {
          std::size_t k = j;
          while (k < line_count() && (blank(k) || top_level_comment(k))) ++k;
          if (k < line_count() && !top_level(k)) {
            j = k;
            continue;
          }
          break;
        }
        if (top_level(j)) break;
        b.last_line = j;
        ++j;
      }
      // A one-line `def f(): return 1` has no separate body lines.
      out.push_back(b);
      i = b.last_line + 1;
    }
    return out;
  }

  FunctionDef function_at(const Block& b) const {
    FunctionDef fn;
    for (std::size_t i = b.first_line; i < b.def_line; ++i) {
      if (is_decorator(i)) fn.decorators.emplace_back(trim(line(i)));
    }
    const std::size_t sig_begin = bounds(b.def_line).begin;
    fn.signature = std::string(text_.substr(sig_begin, bounds(b.sig_end_line).end - sig_begin));
    fn.text = std::string(text_.substr(sig_begin, bounds(b.last_line).end - sig_begin)) + "\n";

    // Name and parameters from the header tokens.
    std::size_t t = 0;
    while (t < tokens_.size() && tokens_[t].line - 1 < static_cast<int>(b.def_line)) ++t;
    while (t < tokens_.size() && tokens_[t].text != "def") ++t;
    if (t + 1 >= tokens_.size() || tokens_[t + 1].kind != TokenKind::name) {
      throw FormatError("function on line " + std::to_string(b.def_line + 1) + " has no name");
    }
    fn.name = std::string(tokens_[t + 1].text);
    t += 2;
    if (t >= tokens_.size() || tokens_[t].text != "(") {
      throw FormatError("function '" + fn.name + "' has no parameter list");
    }
    int depth = 0;
    bool expect_param = true;
    for (++t; t < tokens_.size(); ++t) {
      const auto& tok = tokens_[t];
      if (tok.kind == TokenKind::newline || tok.kind == TokenKind::comment) continue;
      if (tok.text == "(" || tok.text == "[" || tok.text == "{") ++depth;
      if (tok.text == ")" || tok.text == "]" || tok.text == "}") {
        if (depth == 0) break;
        --depth;
      }
      if (depth != 0) continue;
      if (tok.text == ",") {
        expect_param = true;
      } else if (expect_param && tok.kind == TokenKind::name) {
        fn.params.emplace_back(tok.text);
        expect_param = false;
      } else if (expect_param && tok.text != "*" && tok.text != "**" && tok.text != "/") {
        expect_param = false;
      }
    }

    // Docstring: first body token when it is a string.
    const int sig_end_line = static_cast<int>(b.sig_end_line);
    std::size_t colon = 0;
    for (std::size_t k = 0; k < tokens_.size(); ++k) {
      if (tokens_[k].line - 1 == sig_end_line && tokens_[k].text == ":") colon = k;
      if (tokens_[k].line - 1 > sig_end_line) break;
    }
    for (std::size_t k = colon + 1; k < tokens_.size(); ++k) {
      const auto& tok = tokens_[k];
      if (tok.kind == TokenKind::newline || tok.kind == TokenKind::comment) continue;
      if (tok.line - 1 > static_cast<int>(b.last_line)) break;
      if (tok.kind == TokenKind::string) {
        std::string_view s = tok.text;
        while (!s.empty() && s.front() != '"' && s.front() != '\'') s.remove_prefix(1);
        const std::size_t q = (s.size() >= 6 && (s.substr(0, 3) == "\"\"\"" || s.substr(0, 3) == "'''")) ? 3 : 1;
        if (s.size() >= 2 * q) fn.docstring = std::string(s.substr(q, s.size() - 2 * q));
      }
      break;
    }
    for (std::size_t i = b.sig_end_line + 1; i <= b.last_line && i < line_count(); ++i) {
      if (blank(i) || in_string(i)) continue;
      const auto l = line(i);
      fn.body_indent = std::string(l.substr(0, l.find_first_not_of(" \t")));
      break;
    }
    return fn;
  }

  /// True when the body holds nothing but a docstring, as in the header
  /// a prompt ends with.
  bool docstring_only(const Block& b) const {
    if (b.last_line == b.sig_end_line) return false;
    int strings = 0;
    for (const auto& tok : tokens_) {
      const auto line_no = static_cast<std::size_t>(tok.line - 1);
      if (line_no <= b.sig_end_line) continue;
      if (line_no > b.last_line) break;
      if (tok.kind == TokenKind::newline || tok.kind == TokenKind::comment) continue;
      if (tok.kind != TokenKind::string || ++strings > 1) return false;
    }
    return true;
  }

 private:
  std::string_view text_;
  std::vector<Line> lines_;
  std::vector<Token> tokens_;
  std::vector<char> in_string_;
};

std::string versioned(std::string_view base, int k) { return std::string(base) + "_v" + std::to_string(k); }

std::string strip_fences(std::string_view response) {
  if (response.find("```") == std::string_view::npos) return std::string(response);
  std::string out;
  bool inside = false;
  for (const auto& l : split_lines(response)) {
    const auto text = response.substr(l.begin, l.end - l.begin);
    if (trim(text).substr(0, 3) == "```") {
      inside = !inside;
      if (!inside) out += "\n";
      continue;
    }
    if (inside) {
      out.append(text);
      out += "\n";
    }
  }
  return out;
}

}  // namespace

std::string to_string(Origin o) {
  switch (o) {
    case Origin::seed: return "seed";
    case Origin::model: return "model";
    case Origin::scripted: return "scripted";
  }
  return "seed";
}

std::string rename_identifier(std::string_view source, std::string_view from, std::string_view to) {
  std::string out;
  std::size_t last = 0;
  for (const auto& t : pylex::tokenize(source)) {
    if (t.kind == TokenKind::name && t.text == from) {
      out.append(source.substr(last, t.offset - last));
      out.append(to);
      last = t.offset + t.text.size();
    }
  }
  out.append(source.substr(last));
  return out;
}

ProblemSpec parse_spec(std::string_view text) {
  if (trim(text).empty()) throw FormatError("specification is empty");
  ProblemSpec spec;
  spec.raw_text = std::string(text);
  SourceView view(text);

  // System prompt block.
  std::optional<std::size_t> sp_begin, sp_end;
  for (std::size_t i = 0; i < view.line_count(); ++i) {
    const auto l = trim(view.line(i));
    if (!sp_begin && l == kSystemPromptBegin) {
      sp_begin = i;
    } else if (sp_begin && l == kSystemPromptEnd) {
      sp_end = i;
      break;
    }
  }
  std::size_t header_start_line = 0;
  std::string header_prefix;
  if (sp_begin && !sp_end) throw FormatError("'### SYSTEM PROMPT' without '### END SYSTEM PROMPT'");
  if (sp_begin) {
    const std::size_t b = view.bounds(*sp_begin).next;
    const std::size_t e = view.bounds(*sp_end).begin;
    std::string_view prompt = trim(text.substr(b, e > b ? e - b : 0));
    while (!prompt.empty() && (prompt.back() == '\n' || prompt.back() == '\r')) prompt.remove_suffix(1);
    for (std::string_view q : {std::string_view("\"\"\""), std::string_view("'''")}) {
      if (prompt.size() >= 6 && prompt.substr(0, 3) == q && prompt.substr(prompt.size() - 3) == q) {
        prompt = trim(prompt.substr(3, prompt.size() - 6));
        break;
      }
    }
    spec.system_prompt = std::string(prompt);
    header_prefix = std::string(text.substr(0, view.bounds(*sp_begin).begin));
    header_start_line = *sp_end + 1;
  }

  const auto blocks = view.blocks();
  std::vector<std::size_t> evolve, run;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    for (std::size_t i = blocks[k].first_line; i < blocks[k].def_line; ++i) {
      const auto l = trim(view.line(i));
      if (l == kEvolveDecorator) evolve.push_back(k);
      if (l == kRunDecorator) run.push_back(k);
    }
  }
  if (evolve.size() != 1) {
    throw FormatError("expected exactly one '@funsearch.evolve' function, found " +
                      std::to_string(evolve.size()));
  }
  if (run.size() != 1) {
    throw FormatError("expected exactly one '@funsearch.run' function, found " +
                      std::to_string(run.size()));
  }
  const Block& eb = blocks[evolve.front()];
  spec.evolve_target = view.function_at(eb);
  spec.run_entry = view.function_at(blocks[run.front()]).name;

  const std::size_t header_begin =
      header_start_line < view.line_count() ? view.bounds(header_start_line).begin : text.size();
  const std::size_t body_begin = view.bounds(blocks.front().first_line).begin;
  spec.header = header_prefix + std::string(text.substr(header_begin, body_begin - header_begin));

  const std::size_t def_begin = view.bounds(eb.def_line).begin;
  const std::size_t def_end = view.bounds(eb.last_line).next;
  spec.prefix = std::string(text.substr(0, def_begin));
  spec.suffix = std::string(text.substr(def_end));
  spec.fixed_body = std::string(text.substr(body_begin, def_begin - body_begin)) + spec.suffix;
  return spec;
}

ProblemSpec load_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open specification file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

FunctionDef parse_single_function(std::string_view text) {
  SourceView view(text);
  const auto blocks = view.blocks();
  if (blocks.size() != 1) {
    throw FormatError("expected a single function definition, found " + std::to_string(blocks.size()));
  }
  for (std::size_t i = 0; i < view.line_count(); ++i) {
    if (i >= blocks[0].first_line && i <= blocks[0].last_line) continue;
    if (view.top_level(i) && !view.top_level_comment(i)) {
      throw FormatError("unexpected top-level code on line " + std::to_string(i + 1) +
                        " outside the function");
    }
  }
  return view.function_at(blocks[0]);
}

std::string default_system_prompt(const ProblemSpec& spec) {
  const auto& fn = spec.evolve_target;
  std::string out =
      "You are a Python code completion system used inside a genetic algorithm that evolves the "
      "function `" + fn.name + "`. You will be shown earlier versions named " + fn.name +
      "_v0, " + fn.name + "_v1, ... in increasing order of quality, followed by the header of "
      "the next version. Write only the complete next version of the function, as a single "
      "Python function with the same signature. Make small changes and keep the code short.";
  const auto doc = trim(fn.docstring);
  if (!doc.empty()) {
    out += "\n\nThe docstring of `" + fn.name + "` is:\n" + std::string(doc);
  }
  return out;
}

PromptBundle build_prompt(const ProblemSpec& spec, std::vector<PromptProgram> programs,
                          std::size_t max_programs) {
  if (programs.empty() || programs.size() > max_programs) {
    throw FormatError("prompt needs between 1 and " + std::to_string(max_programs) +
                      " programs, got " + std::to_string(programs.size()));
  }
  std::stable_sort(programs.begin(), programs.end(), [](const PromptProgram& a, const PromptProgram& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.registered_at < b.registered_at;
  });

  const std::string& base = spec.evolve_target.name;
  PromptBundle bundle;
  bundle.system_prompt = spec.system_prompt ? *spec.system_prompt : default_system_prompt(spec);
  bundle.expected_next_version = static_cast<int>(programs.size());

  std::vector<std::string> functions;
  for (std::size_t k = 0; k < programs.size(); ++k) {
    const FunctionDef fn = parse_single_function(programs[k].source);
    functions.push_back(rename_identifier(fn.text, fn.name, versioned(base, static_cast<int>(k))));
    bundle.source_programs.emplace_back(programs[k].id, programs[k].score);
  }

  std::string prompt;
  const std::string marker = "improve the " + base + "_v# function";
  if (spec.header.find(marker) == std::string::npos) {
    prompt += "\"\"\"On every iteration, improve the " + base + "_v# function over\nthe " + base +
              "_v# methods from previous iterations.\n\"\"\"\n\n";
  }
  const std::string header = rtrim_copy(spec.header);
  if (!header.empty()) prompt += header + "\n\n";
  for (std::size_t k = 0; k < functions.size(); ++k) {
    if (k > 0) prompt += "\n\n";
    prompt += functions[k];
  }
  const int next = bundle.expected_next_version;
  const std::string indent = spec.evolve_target.body_indent.empty() ? "    " : spec.evolve_target.body_indent;
  const auto sig_fn = spec.evolve_target.signature;
  prompt += "\n\n" + rename_identifier(sig_fn, base, versioned(base, next)) + "\n";
  prompt += indent + "\"\"\"Improved version of `" + versioned(base, next - 1) + "`.\n";
  prompt += indent + "\"\"\"\n";
  bundle.user_prompt = std::move(prompt);
  return bundle;
}

std::optional<std::string> extract_function(std::string_view response, std::string_view name_prefix,
                                            std::string_view canonical_name) {
  const std::string code = strip_fences(response);
  const std::regex def_re("^([ \\t]*)(async[ \\t]+)?def[ \\t]+(" + std::string(name_prefix) +
                          "[A-Za-z0-9_]*)[ \\t]*\\(");
  const auto lines = split_lines(code);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string l = code.substr(lines[i].begin, lines[i].end - lines[i].begin);
    std::smatch m;
    if (!std::regex_search(l, m, def_re)) continue;
    // Dedent everything from the def line by the def's indentation.
    const std::string indent = m[1].str();
    std::string tail;
    for (std::size_t j = i; j < lines.size(); ++j) {
      std::string_view lj(code.data() + lines[j].begin, lines[j].end - lines[j].begin);
      if (!indent.empty() && lj.substr(0, indent.size()) == indent) lj.remove_prefix(indent.size());
      tail.append(lj);
      tail += "\n";
    }
    try {
      SourceView view(tail);
      const auto blocks = view.blocks();
      if (blocks.empty()) continue;
      const FunctionDef fn = view.function_at(blocks.front());
      if (blocks.front().last_line == blocks.front().sig_end_line &&
          trim(view.line(blocks.front().sig_end_line)).back() == ':') {
        continue;  // header without a body
      }
      if (view.docstring_only(blocks.front())) continue;
      return rename_identifier(fn.text, fn.name, canonical_name);
    } catch (const FormatError&) {
      continue;
    }
  }
  return std::nullopt;
}

CandidateCode assemble_candidate(const ProblemSpec& spec, std::string_view priority_source,
                                 Origin origin, std::vector<std::string> parents, std::string model) {
  const FunctionDef fn = parse_single_function(priority_source);
  const auto& target = spec.evolve_target;
  if (fn.params.size() != target.params.size()) {
    throw FormatError("arity mismatch: '" + target.name + "' takes " +
                      std::to_string(target.params.size()) + " parameters, candidate '" + fn.name +
                      "' takes " + std::to_string(fn.params.size()));
  }
  CandidateCode code;
  code.priority_source = fn.name == target.name ? fn.text : rename_identifier(fn.text, fn.name, target.name);
  code.source = spec.prefix + code.priority_source + spec.suffix;
  code.origin = origin;
  code.model = std::move(model);
  code.parent_ids = std::move(parents);
  return code;
}

}  // namespace funsearch::specfmt
