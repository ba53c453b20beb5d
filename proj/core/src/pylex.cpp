#include "funsearch/pylex.hpp"

#include <cctype>

namespace funsearch::pylex {

bool is_identifier_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || static_cast<unsigned char>(c) >= 0x80;
}

bool is_identifier_char(char c) {
  return is_identifier_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

namespace {

class Lexer {
 public:
  Lexer(std::string_view src, std::size_t base, int line, int column)
      : src_(src), base_(base), line_(line), col_(column) {}

  std::vector<Token> run() {
    while (pos_ < src_.size()) step();
    return std::move(out_);
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance(std::size_t count = 1) {
    for (std::size_t i = 0; i < count && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void emit(TokenKind kind, std::size_t start, int line, int col) {
    out_.push_back({kind, src_.substr(start, pos_ - start), base_ + start, line, col});
  }

  // Length of a string prefix (r, b, f, u and two-letter combinations)
  // starting at pos_, or 0 if no string literal starts here.
  std::size_t string_prefix_length(bool& is_format) const {
    std::size_t i = 0;
    is_format = false;
    while (i < 2 && std::isalpha(static_cast<unsigned char>(peek(i)))) {
      const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(peek(i))));
      if (c != 'r' && c != 'b' && c != 'f' && c != 'u') return 0;
      if (c == 'f') is_format = true;
      ++i;
    }
    if (peek(i) == '\'' || peek(i) == '"') return i;
    return 0;
  }

  void lex_string(std::size_t prefix, bool is_format) {
    const std::size_t start = pos_;
    const int line = line_, col = col_;
    bool raw = false;
    for (std::size_t i = 0; i < prefix; ++i) {
      if (std::tolower(static_cast<unsigned char>(peek(i))) == 'r') raw = true;
    }
    advance(prefix);
    const char quote = peek();
    const bool triple = peek(1) == quote && peek(2) == quote;
    advance(triple ? 3 : 1);
    const std::size_t body_start = pos_;
    const int body_line = line_, body_col = col_;
    std::size_t body_end = src_.size();
    while (pos_ < src_.size()) {
      const char c = peek();
      if (c == '\\' && !raw) {
        advance(2);
        continue;
      }
      if (c == '\\' && raw) {
        advance(peek(1) == quote || peek(1) == '\\' ? 2 : 1);
        continue;
      }
      if (!triple && c == '\n') {
        body_end = pos_;
        break;
      }
      if (c == quote && (!triple || (peek(1) == quote && peek(2) == quote))) {
        body_end = pos_;
        advance(triple ? 3 : 1);
        break;
      }
      advance();
    }
    emit(TokenKind::string, start, line, col);
    if (is_format && body_end > body_start) {
      lex_format_fields(body_start, body_end, body_line, body_col);
    }
  }

  // Tokenizes the expressions inside {...} replacement fields.
  void lex_format_fields(std::size_t begin, std::size_t end, int line, int col) {
    std::size_t i = begin;
    int cur_line = line, cur_col = col;
    auto step_pos = [&](std::size_t to) {
      for (; i < to; ++i) {
        if (src_[i] == '\n') {
          ++cur_line;
          cur_col = 1;
        } else {
          ++cur_col;
        }
      }
    };
    while (i < end) {
      if (src_[i] == '{') {
        if (i + 1 < end && src_[i + 1] == '{') {
          step_pos(i + 2);
          continue;
        }
        std::size_t j = i + 1;
        int depth = 1;
        while (j < end && depth > 0) {
          if (src_[j] == '{') ++depth;
          if (src_[j] == '}') --depth;
          if (depth > 0) ++j;
        }
        step_pos(i + 1);
        Lexer inner(src_.substr(i, j - i), base_ + i, cur_line, cur_col);
        for (auto& t : inner.run()) out_.push_back(t);
        step_pos(j);
      } else {
        step_pos(i + 1);
      }
    }
  }

  void step() {
    const char c = peek();
    const std::size_t start = pos_;
    const int line = line_, col = col_;
    if (c == '\n') {
      advance();
      emit(TokenKind::newline, start, line, col);
      return;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == '\f') {
      advance();
      return;
    }
    if (c == '\\' && peek(1) == '\n') {
      advance(2);
      return;
    }
    if (c == '#') {
      while (pos_ < src_.size() && peek() != '\n') advance();
      emit(TokenKind::comment, start, line, col);
      return;
    }
    bool is_format = false;
    if (c == '\'' || c == '"') {
      lex_string(0, false);
      return;
    }
    if (const std::size_t prefix = string_prefix_length(is_format); prefix > 0) {
      lex_string(prefix, is_format);
      return;
    }
    if (is_identifier_start(c)) {
      while (pos_ < src_.size() && is_identifier_char(peek())) advance();
      emit(TokenKind::name, start, line, col);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      while (pos_ < src_.size()) {
        const char d = peek();
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '.' || d == '_') {
          advance();
        } else if ((d == '+' || d == '-') && pos_ > start &&
                   (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E')) {
          advance();
        } else {
          break;
        }
      }
      emit(TokenKind::number, start, line, col);
      return;
    }
    static constexpr std::string_view kThree[] = {"**=", "//=", ">>=", "<<=", "..."};
    static constexpr std::string_view kTwo[] = {"**", "//", "==", "!=", "<=", ">=", "->", "+=",
                                                "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<",
                                                ">>", ":="};
    for (auto op : kThree) {
      if (src_.substr(pos_, op.size()) == op) {
        advance(op.size());
        emit(TokenKind::op, start, line, col);
        return;
      }
    }
    for (auto op : kTwo) {
      if (src_.substr(pos_, op.size()) == op) {
        advance(op.size());
        emit(TokenKind::op, start, line, col);
        return;
      }
    }
    advance();
    emit(TokenKind::op, start, line, col);
  }

  std::string_view src_;
  std::size_t base_;
  std::size_t pos_ = 0;
  int line_;
  int col_;
  std::vector<Token> out_;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source) { return Lexer(source, 0, 1, 1).run(); }

}  // namespace funsearch::pylex
