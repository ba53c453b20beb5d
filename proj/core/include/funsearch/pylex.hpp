#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace funsearch::pylex {

enum class TokenKind { name, number, string, comment, op, newline };

/// Lexical token of guest-language (Python) source. `text` views into the
/// tokenized buffer, which must outlive the tokens.
struct Token {
  TokenKind kind;
  std::string_view text;
  std::size_t offset;
  int line;    ///< 1-based
  int column;  ///< 1-based
};

/// Best-effort tokenizer: never throws, unterminated strings run to end of
/// input. Expressions inside f-string replacement fields are tokenized as
/// code and emitted after the enclosing string token.
std::vector<Token> tokenize(std::string_view source);

bool is_identifier_start(char c);
bool is_identifier_char(char c);

}  // namespace funsearch::pylex
