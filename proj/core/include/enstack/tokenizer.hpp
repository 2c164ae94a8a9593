#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace enstack {

enum class TokenKind { Identifier, Keyword, Number, String, Char, Operator, Punct };

std::string_view to_string(TokenKind kind);

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t offset;  // byte offset of the lexeme in the input

  bool operator==(const Token&) const = default;
};

/// C-family lexer. Whitespace and comments produce no tokens; any byte the
/// grammar does not recognise becomes a one-byte Punct token, so lexing never
/// fails. Unterminated strings, chars and block comments run to end of line
/// (literals) or end of input (comments).
std::vector<Token> tokenize(std::string_view code);

bool is_keyword(std::string_view word);

}  // namespace enstack
