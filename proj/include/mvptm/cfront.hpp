#pragma once

// Lexer and statement-level parser for the C subset handled by the view
// builders. One C lexeme becomes one model token.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mvptm::cfront {

enum class TokenKind : std::uint8_t {
  Keyword,
  Identifier,
  IntLiteral,
  FloatLiteral,
  StringLiteral,
  CharLiteral,
  Operator,
  Punctuation,
};

std::string_view to_string(TokenKind kind);

struct Token {
  int index = 0;
  TokenKind kind = TokenKind::Punctuation;
  std::string text;
  std::size_t begin = 0;  // byte offsets into the source, [begin, end)
  std::size_t end = 0;

  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
  bool is_punct(std::string_view t) const { return kind == TokenKind::Punctuation && text == t; }
  bool is_op(std::string_view t) const { return kind == TokenKind::Operator && text == t; }
  bool is_keyword(std::string_view t) const { return kind == TokenKind::Keyword && text == t; }
};

/// Splits `source` into tokens. Comments and preprocessor lines are dropped.
/// Throws Error(UnterminatedLiteral) on an unclosed string, char or block comment.
std::vector<Token> lex(std::string_view source);

bool is_keyword(std::string_view word);

enum class StatementKind : std::uint8_t {
  Decl,
  Expr,
  Assign,
  IfCond,
  WhileCond,
  ForHeader,
  Return,
  Break,
  Continue,
  Opaque,
};

std::string_view to_string(StatementKind kind);

enum class AccessKind : std::uint8_t {
  Read,
  Write,      // plain assignment or declaration: starts a new provenance chain
  ReadWrite,  // compound assignment, ++, --
};

/// One variable occurrence inside a statement, listed in evaluation order.
struct VarAccess {
  int token = 0;
  std::string name;
  AccessKind kind = AccessKind::Read;
};

struct Statement {
  int id = 0;
  StatementKind kind = StatementKind::Opaque;
  int first_token = 0;  // token_range is [first_token, last_token)
  int last_token = 0;
  std::vector<VarAccess> accesses;

  int size() const { return last_token - first_token; }
};

struct Param {
  std::string name;
  std::string type_text;
  int token = -1;  // identifier token; -1 for unnamed parameters
};

enum class ControlKind : std::uint8_t { Block, Leaf, If, While, For };

/// Control construct tree. Leaf nodes name a statement; If/While/For carry
/// their condition (or header) statement in `stmt` and branches as children
/// (If: then, optional else; loops: body).
struct ControlNode {
  ControlKind kind = ControlKind::Block;
  int stmt = -1;
  std::vector<ControlNode> children;
  bool has_else = false;
};

/// Tokens that are not part of any body statement (return type, name,
/// parameter list, braces, control keywords and their parentheses) map to
/// this pseudo-statement, which precedes statement 0.
inline constexpr int kFrameStatement = -1;

struct FunctionAst {
  std::string name;
  std::vector<Param> params;
  std::vector<Statement> statements;
  ControlNode control;  // root is the function body block
  int token_count = 0;
};

/// Parses a single function definition.
/// Throws Error(NotAFunction) or Error(UnbalancedBraces).
FunctionAst parse(const std::vector<Token>& tokens);

/// Statement id per token; frame tokens (including parameters) map to -1.
std::vector<int> segment(const FunctionAst& ast);

}  // namespace mvptm::cfront
