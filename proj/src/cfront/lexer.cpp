#include "mvptm/cfront.hpp"

#include <algorithm>
#include <iterator>
#include <cctype>

#include "mvptm/error.hpp"

namespace mvptm::cfront {

namespace {

constexpr std::string_view kKeywords[] = {
    "auto",     "break",    "case",     "char",     "const",    "continue", "default",
    "do",       "double",   "else",     "enum",     "extern",   "float",    "for",
    "goto",     "if",       "inline",   "int",      "long",     "register", "restrict",
    "return",   "short",    "signed",   "sizeof",   "static",   "struct",   "switch",
    "typedef",  "union",    "unsigned", "void",     "volatile", "while",    "_Bool",
    "_Complex", "_Alignas", "_Alignof", "_Atomic",  "_Generic", "_Noreturn", "_Static_assert",
    "_Thread_local", "bool",
};

// Longest first so that maximal munch is a linear scan.
constexpr std::string_view kOperators[] = {
    "...", "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&",  "||",  "*=",  "/=", "%=", "+=", "-=", "&=", "^=", "|=", "##", "+",
    "-",   "*",   "/",   "%",  "<",  ">",  "=",  "!",  "~",  "&",  "|",  "^",
    "?",   ":",   ".",   "#",
};

constexpr std::string_view kPunctuation = "(){}[];,";

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    bool line_start = true;
    while (pos_ < src_.size()) {
      const unsigned char c = static_cast<unsigned char>(src_[pos_]);
      if (c == '\n') {
        line_start = true;
        ++pos_;
        continue;
      }
      if (std::isspace(c)) {
        ++pos_;
        continue;
      }
      if (c == '\\' && peek(1) == '\n') {
        pos_ += 2;
        continue;
      }
      if (c == '/' && peek(1) == '/') {
        skip_line();
        continue;
      }
      if (c == '/' && peek(1) == '*') {
        skip_block_comment();
        continue;
      }
      if (c == '#' && line_start) {
        skip_directive();
        continue;
      }
      line_start = false;
      out.push_back(next_token());
      out.back().index = static_cast<int>(out.size()) - 1;
    }
    return out;
  }

 private:
  char peek(std::size_t ahead) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void skip_line() {
    while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
  }

  void skip_block_comment() {
    const auto close = src_.find("*/", pos_ + 2);
    if (close == std::string_view::npos) {
      throw Error(ErrorCode::UnterminatedLiteral,
                  "block comment opened at byte " + std::to_string(pos_));
    }
    pos_ = close + 2;
  }

  // Directives may continue across lines with a trailing backslash and may
  // contain comments; both are consumed with the directive.
  void skip_directive() {
    while (pos_ < src_.size() && src_[pos_] != '\n') {
      if (src_[pos_] == '\\' && peek(1) == '\n') {
        pos_ += 2;
      } else if (src_[pos_] == '/' && peek(1) == '*') {
        skip_block_comment();
      } else {
        ++pos_;
      }
    }
  }

  Token make(TokenKind kind, std::size_t begin) {
    Token t;
    t.kind = kind;
    t.begin = begin;
    t.end = pos_;
    t.text = std::string(src_.substr(begin, pos_ - begin));
    return t;
  }

  Token next_token() {
    const std::size_t begin = pos_;
    const unsigned char c = static_cast<unsigned char>(src_[pos_]);

    // Encoding prefixes glue onto the literal that follows them.
    if ((c == 'L' || c == 'u' || c == 'U') && (peek(1) == '"' || peek(1) == '\'')) {
      ++pos_;
      return quoted(begin);
    }
    if (c == 'u' && peek(1) == '8' && (peek(2) == '"' || peek(2) == '\'')) {
      pos_ += 2;
      return quoted(begin);
    }
    if (ident_start(c)) {
      while (pos_ < src_.size() && ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      Token t = make(TokenKind::Identifier, begin);
      if (is_keyword(t.text)) t.kind = TokenKind::Keyword;
      return t;
    }
    if (std::isdigit(c) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      return number(begin);
    }
    if (c == '"' || c == '\'') return quoted(begin);
    if (kPunctuation.find(static_cast<char>(c)) != std::string_view::npos) {
      ++pos_;
      return make(TokenKind::Punctuation, begin);
    }
    for (auto op : kOperators) {
      if (src_.substr(pos_, op.size()) == op) {
        pos_ += op.size();
        return make(TokenKind::Operator, begin);
      }
    }
    // Anything else (control bytes and the like) becomes a one-byte operator.
    ++pos_;
    return make(TokenKind::Operator, begin);
  }

  Token number(std::size_t begin) {
    bool is_float = false;
    if (src_[pos_] == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
      pos_ += 2;
      while (pos_ < src_.size() && (std::isxdigit(static_cast<unsigned char>(src_[pos_])) ||
                                    src_[pos_] == '.')) {
        if (src_[pos_] == '.') is_float = true;
        ++pos_;
      }
      if (pos_ < src_.size() && (src_[pos_] == 'p' || src_[pos_] == 'P')) {
        is_float = true;
        exponent();
      }
    } else {
      while (pos_ < src_.size() &&
             (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
        if (src_[pos_] == '.') is_float = true;
        ++pos_;
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        is_float = true;
        exponent();
      }
    }
    // Suffixes: u, l, f and friends.
    while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) {
      const char s = static_cast<char>(std::tolower(static_cast<unsigned char>(src_[pos_])));
      if (s == 'f') is_float = true;
      ++pos_;
    }
    return make(is_float ? TokenKind::FloatLiteral : TokenKind::IntLiteral, begin);
  }

  void exponent() {
    ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  Token quoted(std::size_t begin) {
    const char quote = src_[pos_];
    ++pos_;
    while (pos_ < src_.size() && src_[pos_] != quote) {
      if (src_[pos_] == '\n') break;
      if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) ++pos_;
      ++pos_;
    }
    if (pos_ >= src_.size() || src_[pos_] != quote) {
      throw Error(ErrorCode::UnterminatedLiteral,
                  std::string(quote == '"' ? "string" : "char") + " literal opened at byte " +
                      std::to_string(begin));
    }
    ++pos_;
    return make(quote == '"' ? TokenKind::StringLiteral : TokenKind::CharLiteral, begin);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace

bool is_keyword(std::string_view word) {
  return std::find(std::begin(kKeywords), std::end(kKeywords), word) != std::end(kKeywords);
}

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Identifier: return "identifier";
    case TokenKind::IntLiteral: return "int-literal";
    case TokenKind::FloatLiteral: return "float-literal";
    case TokenKind::StringLiteral: return "string-literal";
    case TokenKind::CharLiteral: return "char-literal";
    case TokenKind::Operator: return "operator";
    case TokenKind::Punctuation: return "punctuation";
  }
  return "?";
}

std::vector<Token> lex(std::string_view source) { return Lexer(source).run(); }

}  // namespace mvptm::cfront
