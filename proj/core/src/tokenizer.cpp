#include "enstack/tokenizer.hpp"

#include <algorithm>
#include <array>

namespace enstack {

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Number: return "number";
    case TokenKind::String: return "string";
    case TokenKind::Char: return "char";
    case TokenKind::Operator: return "operator";
    case TokenKind::Punct: return "punct";
  }
  return "punct";
}

namespace {

// C and C++ keywords, sorted for binary search.
constexpr auto kKeywords = std::to_array<std::string_view>({
    "_Bool", "_Complex", "_Imaginary", "alignas", "alignof", "asm", "auto", "bool", "break",
    "case", "catch", "char", "char16_t", "char32_t", "char8_t", "class", "co_await",
    "co_return", "co_yield", "concept", "const", "const_cast", "consteval", "constexpr",
    "constinit", "continue", "decltype", "default", "delete", "do", "double", "dynamic_cast",
    "else", "enum", "explicit", "export", "extern", "false", "float", "for", "friend", "goto",
    "if", "inline", "int", "long", "mutable", "namespace", "new", "noexcept", "nullptr",
    "operator", "private", "protected", "public", "register", "reinterpret_cast", "requires",
    "restrict", "return", "short", "signed", "sizeof", "static", "static_assert",
    "static_cast", "struct", "switch", "template", "this", "thread_local", "throw", "true",
    "try", "typedef", "typeid", "typename", "union", "unsigned", "using", "virtual", "void",
    "volatile", "wchar_t", "while", "and", "or", "not", "xor", "bitand", "bitor", "compl"});

// Longest first so the scan below takes the maximal munch.
constexpr auto kOperators = std::to_array<std::string_view>({
    "<<=", ">>=", "->*", "<=>", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::", ".*", "+", "-", "*", "/",
    "%", "=", "<", ">", "!", "&", "|", "^", "~", "?", ":", "."});

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_'; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_'; }

}  // namespace

bool is_keyword(std::string_view word) {
  static const auto sorted = [] {
    auto k = kKeywords;
    std::sort(k.begin(), k.end());
    return k;
  }();
  return std::binary_search(sorted.begin(), sorted.end(), word);
}

std::vector<Token> tokenize(std::string_view code) {
  std::vector<Token> out;
  const std::size_t n = code.size();
  std::size_t i = 0;
  auto emit = [&](TokenKind kind, std::size_t begin, std::size_t end) {
    out.push_back(Token{kind, std::string(code.substr(begin, end - begin)), begin});
  };
  while (i < n) {
    const auto c = static_cast<unsigned char>(code[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && code[i + 1] == '/') {
      while (i < n && code[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && code[i + 1] == '*') {
      const auto close = code.find("*/", i + 2);
      i = close == std::string_view::npos ? n : close + 2;
      continue;
    }
    const std::size_t start = i;
    if (ident_start(c)) {
      while (i < n && ident_char(static_cast<unsigned char>(code[i]))) ++i;
      // Prefixed literals: L"..", u8"..", R"(..)" are lexed as strings.
      if (i < n && (code[i] == '"' || code[i] == '\'')) {
        const auto prefix = code.substr(start, i - start);
        if (prefix == "L" || prefix == "u" || prefix == "U" || prefix == "u8") {
          const char quote = code[i++];
          while (i < n && code[i] != quote && code[i] != '\n') i += (code[i] == '\\' && i + 1 < n) ? 2 : 1;
          if (i < n && code[i] == quote) ++i;
          emit(quote == '"' ? TokenKind::String : TokenKind::Char, start, std::min(i, n));
          continue;
        }
      }
      const auto word = code.substr(start, i - start);
      emit(is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier, start, i);
      continue;
    }
    if (std::isdigit(c) || (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(code[i + 1])))) {
      ++i;
      while (i < n) {
        const auto d = static_cast<unsigned char>(code[i]);
        if (ident_char(d) || d == '.' || d == '\'') {
          ++i;
        } else if ((d == '+' || d == '-') &&
                   (code[i - 1] == 'e' || code[i - 1] == 'E' || code[i - 1] == 'p' || code[i - 1] == 'P')) {
          ++i;
        } else {
          break;
        }
      }
      emit(TokenKind::Number, start, i);
      continue;
    }
    if (c == '"' || c == '\'') {
      ++i;
      while (i < n && code[i] != static_cast<char>(c) && code[i] != '\n') {
        if (code[i] == '\\' && i + 1 < n && code[i + 1] != '\n') ++i;
        ++i;
      }
      if (i < n && code[i] == static_cast<char>(c)) ++i;
      emit(c == '"' ? TokenKind::String : TokenKind::Char, start, i);
      continue;
    }
    bool matched = false;
    for (auto op : kOperators) {
      if (code.substr(i, op.size()) == op) {
        i += op.size();
        emit(TokenKind::Operator, start, i);
        matched = true;
        break;
      }
    }
    if (!matched) {
      ++i;
      emit(TokenKind::Punct, start, i);
    }
  }
  return out;
}

}  // namespace enstack
