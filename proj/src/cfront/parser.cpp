#include <algorithm>
#include <memory>
#include <optional>
#include <string>

#include "mvptm/cfront.hpp"
#include "mvptm/error.hpp"

namespace mvptm::cfront {

namespace {

constexpr std::string_view kTypeWords[] = {
    "int",      "char",    "short",  "long",     "float",   "double",   "signed",
    "unsigned", "void",    "struct", "union",    "enum",    "const",    "volatile",
    "static",   "extern",  "register", "auto",   "typedef", "inline",   "restrict",
    "_Bool",    "bool",    "_Complex", "_Atomic", "_Thread_local", "_Alignas",
};

bool is_type_word(const Token& t) {
  return t.kind == TokenKind::Keyword &&
         std::find(std::begin(kTypeWords), std::end(kTypeWords), t.text) != std::end(kTypeWords);
}

bool is_assign_op(const Token& t) {
  if (t.kind != TokenKind::Operator) return false;
  static constexpr std::string_view ops[] = {"=",  "+=", "-=", "*=", "/=", "%=",
                                             "&=", "|=", "^=", "<<=", ">>="};
  return std::find(std::begin(ops), std::end(ops), t.text) != std::end(ops);
}

int binary_precedence(const Token& t) {
  if (t.kind != TokenKind::Operator) return -1;
  const auto& s = t.text;
  if (s == "||") return 1;
  if (s == "&&") return 2;
  if (s == "|") return 3;
  if (s == "^") return 4;
  if (s == "&") return 5;
  if (s == "==" || s == "!=") return 6;
  if (s == "<" || s == ">" || s == "<=" || s == ">=") return 7;
  if (s == "<<" || s == ">>") return 8;
  if (s == "+" || s == "-") return 9;
  if (s == "*" || s == "/" || s == "%") return 10;
  return -1;
}

// Raised inside the expression/declaration parsers when a statement falls
// outside the supported subset; the statement is then kept as opaque.
struct Unsupported {};

enum class NodeKind { Ident, Literal, Unary, Postfix, Binary, Assign, Ternary, Call, Index,
                      Member, Cast, SizeofType, InitList, Comma };

struct Node {
  NodeKind kind;
  int token = -1;  // identifier / operator token
  std::vector<std::unique_ptr<Node>> kids;
};

using NodePtr = std::unique_ptr<Node>;

NodePtr make_node(NodeKind kind, int token) {
  auto n = std::make_unique<Node>();
  n->kind = kind;
  n->token = token;
  return n;
}

/// Pratt parser over the half-open token range [pos, end).
class ExprParser {
 public:
  ExprParser(const std::vector<Token>& toks, int begin, int end)
      : toks_(toks), pos_(begin), end_(end) {}

  NodePtr parse_full() {
    auto n = expression();
    if (pos_ != end_) throw Unsupported{};
    return n;
  }

  NodePtr expression() {
    auto lhs = assignment();
    while (at_punct(",")) {
      const int op = pos_++;
      auto c = make_node(NodeKind::Comma, op);
      c->kids.push_back(std::move(lhs));
      c->kids.push_back(assignment());
      lhs = std::move(c);
    }
    return lhs;
  }

  NodePtr assignment() {
    if (at_punct("{")) return init_list();
    auto lhs = conditional();
    if (pos_ < end_ && is_assign_op(toks_[pos_])) {
      const int op = pos_++;
      auto a = make_node(NodeKind::Assign, op);
      a->kids.push_back(std::move(lhs));
      a->kids.push_back(assignment());
      return a;
    }
    return lhs;
  }

  int pos() const { return pos_; }

 private:
  const Token& cur() const {
    if (pos_ >= end_) throw Unsupported{};
    return toks_[pos_];
  }
  bool at_punct(std::string_view p) const { return pos_ < end_ && toks_[pos_].is_punct(p); }
  bool at_op(std::string_view p) const { return pos_ < end_ && toks_[pos_].is_op(p); }
  void expect_punct(std::string_view p) {
    if (!at_punct(p)) throw Unsupported{};
    ++pos_;
  }

  NodePtr conditional() {
    auto c = binary(1);
    if (at_op("?")) {
      const int op = pos_++;
      auto t = make_node(NodeKind::Ternary, op);
      t->kids.push_back(std::move(c));
      t->kids.push_back(expression());
      if (!at_op(":")) throw Unsupported{};
      ++pos_;
      t->kids.push_back(conditional());
      return t;
    }
    return c;
  }

  NodePtr binary(int min_prec) {
    auto lhs = unary();
    while (pos_ < end_) {
      const int prec = binary_precedence(toks_[pos_]);
      if (prec < min_prec) break;
      const int op = pos_++;
      auto rhs = binary(prec + 1);
      auto b = make_node(NodeKind::Binary, op);
      b->kids.push_back(std::move(lhs));
      b->kids.push_back(std::move(rhs));
      lhs = std::move(b);
    }
    return lhs;
  }

  // Index just past a parenthesised type name starting at `lp`, or nullopt.
  std::optional<int> type_name_end(int lp) const {
    int i = lp + 1;
    if (i >= end_) return std::nullopt;
    bool saw_type_word = false;
    bool saw_ident = false;
    while (i < end_ && !toks_[i].is_punct(")")) {
      const Token& t = toks_[i];
      if (is_type_word(t)) {
        saw_type_word = true;
      } else if (t.kind == TokenKind::Identifier) {
        if (saw_ident && !saw_type_word) return std::nullopt;
        saw_ident = true;
      } else if (t.is_op("*") || t.is_punct("[") || t.is_punct("]")) {
        if (!saw_type_word && !saw_ident) return std::nullopt;
      } else {
        return std::nullopt;
      }
      ++i;
    }
    if (i >= end_ || (!saw_type_word && !saw_ident)) return std::nullopt;
    if (saw_type_word) return i + 1;
    // `(name *)` is a cast; bare `(name)` only when an operand follows.
    if (toks_[i - 1].is_op("*")) return i + 1;
    if (i + 1 < end_) {
      const Token& next = toks_[i + 1];
      if (next.kind == TokenKind::Identifier || next.kind == TokenKind::IntLiteral ||
          next.kind == TokenKind::FloatLiteral || next.kind == TokenKind::CharLiteral) {
        return i + 1;
      }
    }
    return std::nullopt;
  }

  NodePtr unary() {
    const Token& t = cur();
    if (t.kind == TokenKind::Operator &&
        (t.text == "++" || t.text == "--" || t.text == "+" || t.text == "-" || t.text == "!" ||
         t.text == "~" || t.text == "*" || t.text == "&")) {
      const int op = pos_++;
      auto u = make_node(NodeKind::Unary, op);
      u->kids.push_back(unary());
      return u;
    }
    if (t.is_keyword("sizeof") || t.is_keyword("_Alignof")) {
      const int op = pos_++;
      if (at_punct("(")) {
        if (auto close = type_name_end(pos_)) {
          pos_ = *close;
          return make_node(NodeKind::SizeofType, op);
        }
      }
      auto u = make_node(NodeKind::Unary, op);
      u->kids.push_back(unary());
      return u;
    }
    if (t.is_punct("(")) {
      if (auto close = type_name_end(pos_)) {
        const int lp = pos_;
        pos_ = *close;
        auto c = make_node(NodeKind::Cast, lp);
        c->kids.push_back(at_punct("{") ? init_list() : unary());
        return c;
      }
    }
    return postfix(primary());
  }

  NodePtr primary() {
    const Token& t = cur();
    switch (t.kind) {
      case TokenKind::Identifier:
        return make_node(NodeKind::Ident, pos_++);
      case TokenKind::IntLiteral:
      case TokenKind::FloatLiteral:
      case TokenKind::CharLiteral:
        return make_node(NodeKind::Literal, pos_++);
      case TokenKind::StringLiteral: {
        auto n = make_node(NodeKind::Literal, pos_++);
        while (pos_ < end_ && toks_[pos_].kind == TokenKind::StringLiteral) ++pos_;
        return n;
      }
      default:
        break;
    }
    if (t.is_punct("(")) {
      ++pos_;
      auto inner = expression();
      expect_punct(")");
      return inner;
    }
    throw Unsupported{};
  }

  NodePtr postfix(NodePtr base) {
    while (pos_ < end_) {
      const Token& t = toks_[pos_];
      if (t.is_punct("(")) {
        auto call = make_node(NodeKind::Call, pos_++);
        call->kids.push_back(std::move(base));
        if (!at_punct(")")) {
          call->kids.push_back(assignment());
          while (at_punct(",")) {
            ++pos_;
            call->kids.push_back(assignment());
          }
        }
        expect_punct(")");
        base = std::move(call);
      } else if (t.is_punct("[")) {
        auto idx = make_node(NodeKind::Index, pos_++);
        idx->kids.push_back(std::move(base));
        idx->kids.push_back(expression());
        expect_punct("]");
        base = std::move(idx);
      } else if (t.is_op(".") || t.is_op("->")) {
        auto m = make_node(NodeKind::Member, pos_++);
        if (cur().kind != TokenKind::Identifier) throw Unsupported{};
        ++pos_;
        m->kids.push_back(std::move(base));
        base = std::move(m);
      } else if (t.is_op("++") || t.is_op("--")) {
        auto p = make_node(NodeKind::Postfix, pos_++);
        p->kids.push_back(std::move(base));
        base = std::move(p);
      } else {
        break;
      }
    }
    return base;
  }

  NodePtr init_list() {
    auto list = make_node(NodeKind::InitList, pos_);
    expect_punct("{");
    while (!at_punct("}")) {
      // Designators: .field = / [index] =
      if (at_op(".") && pos_ + 2 < end_ && toks_[pos_ + 1].kind == TokenKind::Identifier &&
          toks_[pos_ + 2].is_op("=")) {
        pos_ += 3;
      } else if (at_punct("[")) {
        int depth = 0;
        int i = pos_;
        for (; i < end_; ++i) {
          if (toks_[i].is_punct("[")) ++depth;
          if (toks_[i].is_punct("]") && --depth == 0) break;
        }
        if (i + 1 < end_ && toks_[i + 1].is_op("=")) {
          auto idx = ExprParser(toks_, pos_ + 1, i).parse_full();
          list->kids.push_back(std::move(idx));
          pos_ = i + 2;
        }
      }
      list->kids.push_back(assignment());
      if (at_punct(",")) {
        ++pos_;
      } else {
        break;
      }
    }
    expect_punct("}");
    return list;
  }

  const std::vector<Token>& toks_;
  int pos_;
  int end_;
};

/// Appends variable accesses of `n` in evaluation order.
void collect_accesses(const Node& n, const std::vector<Token>& toks, std::vector<VarAccess>& out) {
  auto access = [&](int tok, AccessKind kind) { out.push_back({tok, toks[tok].text, kind}); };
  switch (n.kind) {
    case NodeKind::Ident:
      access(n.token, AccessKind::Read);
      return;
    case NodeKind::Literal:
    case NodeKind::SizeofType:
      return;
    case NodeKind::Unary:
    case NodeKind::Postfix: {
      const auto& op = toks[n.token];
      const bool incdec = op.text == "++" || op.text == "--";
      if (incdec && n.kids[0]->kind == NodeKind::Ident) {
        access(n.kids[0]->token, AccessKind::ReadWrite);
      } else {
        collect_accesses(*n.kids[0], toks, out);
      }
      return;
    }
    case NodeKind::Assign: {
      collect_accesses(*n.kids[1], toks, out);
      const Node& lhs = *n.kids[0];
      if (lhs.kind == NodeKind::Ident) {
        access(lhs.token, toks[n.token].text == "=" ? AccessKind::Write : AccessKind::ReadWrite);
      } else {
        collect_accesses(lhs, toks, out);
      }
      return;
    }
    case NodeKind::Call: {
      const Node& callee = *n.kids[0];
      if (callee.kind != NodeKind::Ident) collect_accesses(callee, toks, out);
      for (std::size_t i = 1; i < n.kids.size(); ++i) collect_accesses(*n.kids[i], toks, out);
      return;
    }
    default:
      for (const auto& k : n.kids) collect_accesses(*k, toks, out);
  }
}

class FunctionParser {
 public:
  explicit FunctionParser(const std::vector<Token>& toks) : toks_(toks) {}

  FunctionAst run() {
    const int n = static_cast<int>(toks_.size());
    ast_.token_count = n;
    match_braces();

    int body_open = -1;
    int paren = 0;
    for (int i = 0; i < n; ++i) {
      if (toks_[i].is_punct("(")) ++paren;
      if (toks_[i].is_punct(")")) --paren;
      if (toks_[i].is_punct("{") && paren == 0) {
        body_open = i;
        break;
      }
    }
    if (body_open < 0) throw Error(ErrorCode::NotAFunction, "no function body found");
    const int body_close = brace_match_[body_open];
    if (body_close != n - 1) {
      throw Error(ErrorCode::NotAFunction, "tokens follow the function body");
    }

    int rparen = -1;
    for (int i = body_open - 1; i >= 0; --i) {
      if (toks_[i].is_punct(")")) {
        rparen = i;
        break;
      }
    }
    if (rparen < 0) throw Error(ErrorCode::NotAFunction, "no parameter list found");
    int lparen = -1;
    int depth = 0;
    for (int i = rparen; i >= 0; --i) {
      if (toks_[i].is_punct(")")) ++depth;
      if (toks_[i].is_punct("(") && --depth == 0) {
        lparen = i;
        break;
      }
    }
    if (lparen <= 0 || toks_[lparen - 1].kind != TokenKind::Identifier) {
      throw Error(ErrorCode::NotAFunction, "no function name before parameter list");
    }
    ast_.name = toks_[lparen - 1].text;
    parse_params(lparen + 1, rparen);

    ast_.control.kind = ControlKind::Block;
    parse_block_items(body_open + 1, body_close, ast_.control);
    return std::move(ast_);
  }

 private:
  void match_braces() {
    brace_match_.assign(toks_.size(), -1);
    std::vector<int> stack;
    for (int i = 0; i < static_cast<int>(toks_.size()); ++i) {
      if (toks_[i].is_punct("{")) {
        stack.push_back(i);
      } else if (toks_[i].is_punct("}")) {
        if (stack.empty()) {
          throw Error(ErrorCode::UnbalancedBraces, "unmatched '}' at token " + std::to_string(i));
        }
        brace_match_[stack.back()] = i;
        brace_match_[i] = stack.back();
        stack.pop_back();
      }
    }
    if (!stack.empty()) {
      throw Error(ErrorCode::UnbalancedBraces,
                  "unmatched '{' at token " + std::to_string(stack.back()));
    }
  }

  void parse_params(int begin, int end) {
    int start = begin;
    int depth = 0;
    for (int i = begin; i <= end; ++i) {
      if (i < end) {
        if (toks_[i].is_punct("(") || toks_[i].is_punct("[")) ++depth;
        if (toks_[i].is_punct(")") || toks_[i].is_punct("]")) --depth;
      }
      if (i == end || (depth == 0 && toks_[i].is_punct(","))) {
        add_param(start, i);
        start = i + 1;
      }
    }
  }

  void add_param(int begin, int end) {
    if (begin >= end) return;
    if (end - begin == 1 && (toks_[begin].is_keyword("void") || toks_[begin].is_op("..."))) return;
    int name = -1;
    int words = 0;
    for (int i = begin; i < end; ++i) {
      if (toks_[i].kind == TokenKind::Identifier || toks_[i].kind == TokenKind::Keyword) ++words;
      if (toks_[i].kind == TokenKind::Identifier) name = i;
    }
    if (words < 2) name = -1;
    Param p;
    p.token = name;
    if (name >= 0) p.name = toks_[name].text;
    for (int i = begin; i < end; ++i) {
      if (i == name) continue;
      if (!p.type_text.empty()) p.type_text += ' ';
      p.type_text += toks_[i].text;
    }
    ast_.params.push_back(std::move(p));
  }

  int add_statement(StatementKind kind, int first, int last) {
    Statement s;
    s.id = static_cast<int>(ast_.statements.size());
    s.kind = kind;
    s.first_token = first;
    s.last_token = last;
    ast_.statements.push_back(std::move(s));
    return ast_.statements.back().id;
  }

  void leaf(ControlNode& parent, int stmt) {
    ControlNode node;
    node.kind = ControlKind::Leaf;
    node.stmt = stmt;
    parent.children.push_back(std::move(node));
  }

  void parse_block_items(int begin, int end, ControlNode& block) {
    int pos = begin;
    while (pos < end) pos = parse_statement(pos, end, block);
  }

  // Index of the matching closer for the opener at `open`, searching no
  // further than `limit`; -1 when absent.
  int matching(int open, int limit) const {
    if (toks_[open].is_punct("{")) return brace_match_[open] < limit ? brace_match_[open] : -1;
    const std::string_view o = toks_[open].text;
    const std::string_view c = o == "(" ? ")" : "]";
    int depth = 0;
    for (int i = open; i < limit; ++i) {
      if (toks_[i].is_punct("{")) {
        i = brace_match_[i];
        continue;
      }
      if (toks_[i].is_punct(o)) ++depth;
      if (toks_[i].is_punct(c) && --depth == 0) return i;
    }
    return -1;
  }

  // One past the `;` ending the simple statement at `pos`, or the block end.
  int statement_end(int pos, int end) const {
    int depth = 0;
    for (int i = pos; i < end; ++i) {
      const Token& t = toks_[i];
      if (t.is_punct("{")) {
        i = brace_match_[i];
        continue;
      }
      if (t.is_punct("(") || t.is_punct("[")) ++depth;
      if (t.is_punct(")") || t.is_punct("]")) --depth;
      if (t.is_punct(";") && depth <= 0) return i + 1;
    }
    return end;
  }

  // End of a sub-statement used by opaque constructs (switch/do bodies).
  int substatement_end(int pos, int end) const {
    if (pos >= end) return end;
    if (toks_[pos].is_punct("{")) return brace_match_[pos] + 1;
    return statement_end(pos, end);
  }

  int opaque(int first, int last, ControlNode& parent) {
    const int id = add_statement(StatementKind::Opaque, first, last);
    ast_.statements[id].accesses = heuristic_accesses(first, last);
    leaf(parent, id);
    return last;
  }

  std::vector<VarAccess> heuristic_accesses(int first, int last) const {
    std::vector<VarAccess> out;
    for (int i = first; i < last; ++i) {
      const Token& t = toks_[i];
      if (t.kind != TokenKind::Identifier) continue;
      if (i + 1 < last && (toks_[i + 1].is_punct("(") || toks_[i + 1].is_op(":"))) continue;
      if (i > first && (toks_[i - 1].is_op(".") || toks_[i - 1].is_op("->") ||
                        toks_[i - 1].is_keyword("goto"))) {
        continue;
      }
      out.push_back({i, t.text, AccessKind::Read});
    }
    return out;
  }

  int parse_statement(int pos, int end, ControlNode& parent) {
    const Token& t = toks_[pos];
    if (t.is_punct("{")) {
      ControlNode block;
      block.kind = ControlKind::Block;
      const int close = brace_match_[pos];
      parse_block_items(pos + 1, close, block);
      parent.children.push_back(std::move(block));
      return close + 1;
    }
    if (t.is_keyword("if") || t.is_keyword("while")) return parse_conditional(pos, end, parent);
    if (t.is_keyword("for")) return parse_for(pos, end, parent);
    if (t.is_keyword("switch")) {
      const int rp = pos + 1 < end && toks_[pos + 1].is_punct("(") ? matching(pos + 1, end) : -1;
      if (rp < 0) return opaque(pos, statement_end(pos, end), parent);
      return opaque(pos, substatement_end(rp + 1, end), parent);
    }
    if (t.is_keyword("do")) {
      int after_body = substatement_end(pos + 1, end);
      if (after_body < end && toks_[after_body].is_keyword("while")) {
        after_body = statement_end(after_body, end);
      }
      return opaque(pos, after_body, parent);
    }
    if (t.is_keyword("case") || t.is_keyword("default")) {
      for (int i = pos; i < end; ++i) {
        if (toks_[i].is_op(":")) return opaque(pos, i + 1, parent);
      }
      return opaque(pos, end, parent);
    }
    if (t.kind == TokenKind::Identifier && pos + 1 < end && toks_[pos + 1].is_op(":")) {
      return opaque(pos, pos + 2, parent);  // label
    }
    if (t.is_keyword("goto") || t.is_keyword("else")) {
      const int last = t.is_keyword("else") ? pos + 1 : statement_end(pos, end);
      return opaque(pos, last, parent);
    }
    if (t.is_keyword("break") || t.is_keyword("continue")) {
      const int last = statement_end(pos, end);
      if (last != pos + 2) return opaque(pos, last, parent);
      leaf(parent, add_statement(t.is_keyword("break") ? StatementKind::Break
                                                       : StatementKind::Continue,
                                 pos, last));
      return last;
    }
    if (t.is_keyword("return")) {
      const int last = statement_end(pos, end);
      const int expr_end = toks_[last - 1].is_punct(";") ? last - 1 : last;
      std::vector<VarAccess> acc;
      if (expr_end > pos + 1 && !expression_accesses(pos + 1, expr_end, acc)) {
        return opaque(pos, last, parent);
      }
      const int id = add_statement(StatementKind::Return, pos, last);
      ast_.statements[id].accesses = std::move(acc);
      leaf(parent, id);
      return last;
    }
    return parse_simple(pos, end, parent);
  }

  // Declarations and expression statements.
  int parse_simple(int pos, int end, ControlNode& parent) {
    const int last = statement_end(pos, end);
    if (last == end && !(last > pos && toks_[last - 1].is_punct(";"))) {
      return opaque(pos, last, parent);
    }
    const int body_end = last - 1;  // index of ';'
    std::vector<VarAccess> acc;
    StatementKind kind = StatementKind::Expr;
    if (body_end == pos) {
      kind = StatementKind::Expr;
    } else if (looks_like_declaration(pos, body_end)) {
      if (!declaration_accesses(pos, body_end, acc)) return opaque(pos, last, parent);
      kind = StatementKind::Decl;
    } else {
      try {
        ExprParser p(toks_, pos, body_end);
        auto root = p.parse_full();
        collect_accesses(*root, toks_, acc);
        if (root->kind == NodeKind::Assign) kind = StatementKind::Assign;
      } catch (const Unsupported&) {
        return opaque(pos, last, parent);
      }
    }
    const int id = add_statement(kind, pos, last);
    ast_.statements[id].accesses = std::move(acc);
    leaf(parent, id);
    return last;
  }

  int parse_conditional(int pos, int end, ControlNode& parent) {
    const bool is_if = toks_[pos].is_keyword("if");
    if (pos + 1 >= end || !toks_[pos + 1].is_punct("(")) {
      return opaque(pos, statement_end(pos, end), parent);
    }
    const int rp = matching(pos + 1, end);
    if (rp < 0 || rp == pos + 2 || rp + 1 >= end) {
      return opaque(pos, statement_end(pos, end), parent);
    }
    std::vector<VarAccess> acc;
    if (!expression_accesses(pos + 2, rp, acc)) {
      // Unparseable condition: keep the structure, fall back to heuristics.
      acc = heuristic_accesses(pos + 2, rp);
    }
    const int cond = add_statement(is_if ? StatementKind::IfCond : StatementKind::WhileCond,
                                   pos + 2, rp);
    ast_.statements[cond].accesses = std::move(acc);

    ControlNode node;
    node.kind = is_if ? ControlKind::If : ControlKind::While;
    node.stmt = cond;
    int next = branch(rp + 1, end, node);
    if (is_if && next < end && toks_[next].is_keyword("else")) {
      node.has_else = true;
      next = branch(next + 1, end, node);
    }
    parent.children.push_back(std::move(node));
    return next;
  }

  // Parses one sub-statement into a fresh block child of `node`.
  int branch(int pos, int end, ControlNode& node) {
    ControlNode body;
    body.kind = ControlKind::Block;
    const int next = pos < end ? parse_statement(pos, end, body) : end;
    node.children.push_back(std::move(body));
    return next;
  }

  int parse_for(int pos, int end, ControlNode& parent) {
    if (pos + 1 >= end || !toks_[pos + 1].is_punct("(")) {
      return opaque(pos, statement_end(pos, end), parent);
    }
    const int rp = matching(pos + 1, end);
    if (rp < 0 || rp == pos + 2 || rp + 1 >= end) {
      return opaque(pos, statement_end(pos, end), parent);
    }
    std::vector<int> semis;
    int depth = 0;
    for (int i = pos + 2; i < rp; ++i) {
      if (toks_[i].is_punct("(") || toks_[i].is_punct("[")) ++depth;
      if (toks_[i].is_punct(")") || toks_[i].is_punct("]")) --depth;
      if (depth == 0 && toks_[i].is_punct(";")) semis.push_back(i);
    }
    std::vector<VarAccess> acc;
    bool ok = semis.size() == 2;
    if (ok) {
      const int a = pos + 2;
      const int b = semis[0];
      const int c = semis[1];
      if (a < b) {
        ok = looks_like_declaration(a, b) ? declaration_accesses(a, b, acc)
                                          : expression_accesses(a, b, acc);
      }
      if (ok && b + 1 < c) ok = expression_accesses(b + 1, c, acc);
      if (ok && c + 1 < rp) ok = expression_accesses(c + 1, rp, acc);
    }
    if (!ok) acc = heuristic_accesses(pos + 2, rp);

    const int header = add_statement(StatementKind::ForHeader, pos + 2, rp);
    ast_.statements[header].accesses = std::move(acc);
    ControlNode node;
    node.kind = ControlKind::For;
    node.stmt = header;
    const int next = branch(rp + 1, end, node);
    parent.children.push_back(std::move(node));
    return next;
  }

  bool expression_accesses(int begin, int end, std::vector<VarAccess>& out) const {
    try {
      auto root = ExprParser(toks_, begin, end).parse_full();
      collect_accesses(*root, toks_, out);
      return true;
    } catch (const Unsupported&) {
      return false;
    }
  }

  bool looks_like_declaration(int pos, int end) const {
    const Token& t = toks_[pos];
    if (is_type_word(t)) return true;
    if (t.kind != TokenKind::Identifier || pos + 1 >= end) return false;
    const Token& next = toks_[pos + 1];
    if (next.kind == TokenKind::Identifier || is_type_word(next)) return true;
    if (!next.is_op("*")) return false;
    int i = pos + 1;
    while (i < end && toks_[i].is_op("*")) ++i;
    while (i < end && is_type_word(toks_[i])) ++i;  // `T * const p`
    if (i >= end || toks_[i].kind != TokenKind::Identifier) return false;
    return i + 1 == end || toks_[i + 1].is_op("=") || toks_[i + 1].is_punct(",") ||
           toks_[i + 1].is_punct("[");
  }

  // Declarator names are the first identifier followed by `=`, `[`, `)` or
  // the end of the comma-separated chunk.
  bool declaration_accesses(int begin, int end, std::vector<VarAccess>& out) const {
    std::vector<std::pair<int, int>> chunks;
    int start = begin;
    int depth = 0;
    for (int i = begin; i < end; ++i) {
      const Token& t = toks_[i];
      if (t.is_punct("{")) {
        i = brace_match_[i];
        continue;
      }
      if (t.is_punct("(") || t.is_punct("[")) ++depth;
      if (t.is_punct(")") || t.is_punct("]")) --depth;
      if (depth == 0 && t.is_punct(",")) {
        chunks.emplace_back(start, i);
        start = i + 1;
      }
    }
    chunks.emplace_back(start, end);

    for (auto [cb, ce] : chunks) {
      int name = -1;
      for (int i = cb; i < ce; ++i) {
        if (toks_[i].kind != TokenKind::Identifier) continue;
        if (i + 1 == ce || toks_[i + 1].is_op("=") || toks_[i + 1].is_punct("[") ||
            toks_[i + 1].is_punct(")")) {
          name = i;
          break;
        }
      }
      if (name < 0) return false;
      int i = name + 1;
      while (i < ce && toks_[i].is_punct(")")) ++i;
      while (i < ce && toks_[i].is_punct("[")) {
        const int close = matching(i, ce);
        if (close < 0) return false;
        if (close > i + 1 && !expression_accesses(i + 1, close, out)) return false;
        i = close + 1;
      }
      if (i < ce) {
        if (!toks_[i].is_op("=") || i + 1 >= ce) return false;
        try {
          ExprParser p(toks_, i + 1, ce);
          auto root = p.assignment();
          if (p.pos() != ce) return false;
          collect_accesses(*root, toks_, out);
        } catch (const Unsupported&) {
          return false;
        }
      }
      out.push_back({name, toks_[name].text, AccessKind::Write});
    }
    return true;
  }

  const std::vector<Token>& toks_;
  std::vector<int> brace_match_;
  FunctionAst ast_;
};

}  // namespace

std::string_view to_string(StatementKind kind) {
  switch (kind) {
    case StatementKind::Decl: return "decl";
    case StatementKind::Expr: return "expr";
    case StatementKind::Assign: return "assign";
    case StatementKind::IfCond: return "if-cond";
    case StatementKind::WhileCond: return "while-cond";
    case StatementKind::ForHeader: return "for-header";
    case StatementKind::Return: return "return";
    case StatementKind::Break: return "break";
    case StatementKind::Continue: return "continue";
    case StatementKind::Opaque: return "opaque";
  }
  return "?";
}

FunctionAst parse(const std::vector<Token>& tokens) { return FunctionParser(tokens).run(); }

std::vector<int> segment(const FunctionAst& ast) {
  std::vector<int> seg(static_cast<std::size_t>(ast.token_count), kFrameStatement);
  for (const auto& s : ast.statements) {
    for (int t = s.first_token; t < s.last_token; ++t) seg[static_cast<std::size_t>(t)] = s.id;
  }
  return seg;
}

}  // namespace mvptm::cfront
