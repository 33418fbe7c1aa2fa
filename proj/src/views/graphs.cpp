#include <algorithm>
#include <map>
#include <set>

#include "mvptm/views.hpp"

namespace mvptm::views {

using cfront::AccessKind;
using cfront::ControlKind;
using cfront::ControlNode;
using cfront::FunctionAst;
using cfront::StatementKind;

namespace {

void normalize(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

std::map<int, std::vector<int>> tokens_by_statement(std::span<const int> segmentation) {
  std::map<int, std::vector<int>> groups;
  for (int t = 0; t < static_cast<int>(segmentation.size()); ++t) {
    groups[segmentation[static_cast<std::size_t>(t)]].push_back(t);
  }
  return groups;
}

// A fragment of the control-flow graph: the first statement executed (or -1
// when the fragment is empty and control passes straight through) and the
// statements whose successor is whatever follows the fragment.
struct Fragment {
  int first = -1;
  std::vector<int> exits;
};

class CfgBuilder {
 public:
  explicit CfgBuilder(const FunctionAst& ast) : ast_(ast) {}

  StmtGraph run() {
    StmtGraph g;
    const Fragment root = build(ast_.control, nullptr);
    normalize(edges_);
    g.edges = std::move(edges_);
    g.entry = root.first;
    return g;
  }

 private:
  struct Loop {
    int head;
    std::vector<int> breaks;
  };

  void edge(int from, int to) { edges_.emplace_back(from, to); }

  Fragment build(const ControlNode& node, Loop* loop) {
    switch (node.kind) {
      case ControlKind::Block: {
        Fragment out;
        std::vector<int> pending;
        for (const auto& child : node.children) {
          Fragment f = build(child, loop);
          if (f.first < 0) continue;
          if (out.first < 0) out.first = f.first;
          for (int p : pending) edge(p, f.first);
          pending = std::move(f.exits);
        }
        if (out.first < 0) return out;
        out.exits = std::move(pending);
        return out;
      }
      case ControlKind::Leaf: {
        const int s = node.stmt;
        switch (ast_.statements[static_cast<std::size_t>(s)].kind) {
          case StatementKind::Return:
            return {s, {}};
          case StatementKind::Break:
            if (loop == nullptr) return {s, {s}};
            loop->breaks.push_back(s);
            return {s, {}};
          case StatementKind::Continue:
            if (loop == nullptr) return {s, {s}};
            edge(s, loop->head);
            return {s, {}};
          default:
            return {s, {s}};
        }
      }
      case ControlKind::If: {
        const int c = node.stmt;
        Fragment out{c, {}};
        auto branch = [&](const ControlNode& b) {
          Fragment f = build(b, loop);
          if (f.first < 0) {
            out.exits.push_back(c);
            return;
          }
          edge(c, f.first);
          out.exits.insert(out.exits.end(), f.exits.begin(), f.exits.end());
        };
        branch(node.children.at(0));
        if (node.has_else) {
          branch(node.children.at(1));
        } else {
          out.exits.push_back(c);
        }
        std::sort(out.exits.begin(), out.exits.end());
        out.exits.erase(std::unique(out.exits.begin(), out.exits.end()), out.exits.end());
        return out;
      }
      case ControlKind::While:
      case ControlKind::For: {
        const int c = node.stmt;
        Loop inner{c, {}};
        Fragment body = build(node.children.at(0), &inner);
        if (body.first < 0) {
          edge(c, c);
        } else {
          edge(c, body.first);
          for (int e : body.exits) edge(e, c);
        }
        Fragment out{c, {c}};
        out.exits.insert(out.exits.end(), inner.breaks.begin(), inner.breaks.end());
        return out;
      }
    }
    return {};
  }

  const FunctionAst& ast_;
  std::vector<Edge> edges_;
};

using LiveMap = std::map<std::string, std::set<int>>;

// Applies one statement's accesses to the incoming provenance state. When
// `edges` is non-null the provenance links are recorded.
LiveMap transfer(const cfront::Statement& stmt, LiveMap live, std::vector<Edge>* edges) {
  std::map<std::string, int> pending_reads;
  auto link = [&](int from, const std::string& var) {
    if (edges == nullptr) return;
    auto it = live.find(var);
    if (it == live.end()) return;
    for (int to : it->second) {
      if (to != from) edges->emplace_back(from, to);
    }
  };
  for (const auto& a : stmt.accesses) {
    switch (a.kind) {
      case AccessKind::Read:
        link(a.token, a.name);
        pending_reads[a.name] = a.token;
        break;
      case AccessKind::Write:
        live[a.name] = {a.token};
        pending_reads.erase(a.name);
        break;
      case AccessKind::ReadWrite:
        link(a.token, a.name);
        live[a.name] = {a.token};
        pending_reads.erase(a.name);
        break;
    }
  }
  for (const auto& [var, tok] : pending_reads) live[var] = {tok};
  return live;
}

void merge_into(LiveMap& dst, const LiveMap& src) {
  for (const auto& [var, toks] : src) dst[var].insert(toks.begin(), toks.end());
}

}  // namespace

bool ViewGraph::contains(int i, int j) const {
  return std::binary_search(edges.begin(), edges.end(), Edge{i, j});
}

ViewGraph ViewGraph::from_edges(ViewKind kind, int n, std::vector<Edge> edges) {
  normalize(edges);
  return ViewGraph{kind, n, std::move(edges)};
}

ViewGraph build_ast_view(std::span<const int> segmentation) {
  std::vector<Edge> edges;
  for (const auto& [stmt, toks] : tokens_by_statement(segmentation)) {
    for (int i : toks) {
      for (int j : toks) edges.emplace_back(i, j);
    }
  }
  return ViewGraph::from_edges(ViewKind::Ast, static_cast<int>(segmentation.size()),
                               std::move(edges));
}

StmtGraph build_cfg(const FunctionAst& ast) { return CfgBuilder(ast).run(); }

ViewGraph build_dfg(const FunctionAst& ast) {
  const int count = static_cast<int>(ast.statements.size());
  std::vector<std::vector<int>> preds(static_cast<std::size_t>(count));
  const StmtGraph cfg = build_cfg(ast);
  for (auto [from, to] : cfg.edges) preds[static_cast<std::size_t>(to)].push_back(from);

  LiveMap seed;
  for (const auto& p : ast.params) {
    if (p.token >= 0) seed[p.name] = {p.token};
  }

  std::vector<LiveMap> in(static_cast<std::size_t>(count));
  std::vector<LiveMap> out(static_cast<std::size_t>(count));
  std::vector<bool> reached(static_cast<std::size_t>(count), false);

  auto incoming = [&](int s) {
    LiveMap state;
    if (s == cfg.entry) state = seed;
    for (int p : preds[static_cast<std::size_t>(s)]) {
      if (reached[static_cast<std::size_t>(p)]) merge_into(state, out[static_cast<std::size_t>(p)]);
    }
    return state;
  };

  // Round-robin to a fixpoint; the state only grows and is bounded by the
  // finite set of occurrence tokens.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int s = 0; s < count; ++s) {
      const bool is_entry = s == cfg.entry;
      bool has_reached_pred = false;
      for (int p : preds[static_cast<std::size_t>(s)]) {
        has_reached_pred = has_reached_pred || reached[static_cast<std::size_t>(p)];
      }
      if (!is_entry && !has_reached_pred) continue;
      LiveMap state = incoming(s);
      LiveMap next = transfer(ast.statements[static_cast<std::size_t>(s)], state, nullptr);
      if (!reached[static_cast<std::size_t>(s)] || next != out[static_cast<std::size_t>(s)] ||
          state != in[static_cast<std::size_t>(s)]) {
        reached[static_cast<std::size_t>(s)] = true;
        in[static_cast<std::size_t>(s)] = std::move(state);
        out[static_cast<std::size_t>(s)] = std::move(next);
        changed = true;
      }
    }
  }

  std::vector<Edge> edges;
  for (int s = 0; s < count; ++s) {
    if (!reached[static_cast<std::size_t>(s)]) continue;
    transfer(ast.statements[static_cast<std::size_t>(s)], in[static_cast<std::size_t>(s)], &edges);
  }
  return ViewGraph::from_edges(ViewKind::Dfg, ast.token_count, std::move(edges));
}

ViewGraph project(const StmtGraph& sg, std::span<const int> segmentation, ViewKind kind) {
  const auto groups = tokens_by_statement(segmentation);
  std::vector<Edge> edges;
  for (const auto& [stmt, toks] : groups) {
    for (int i : toks) {
      for (int j : toks) edges.emplace_back(i, j);
    }
  }
  for (auto [a, b] : sg.edges) {
    const auto ia = groups.find(a);
    const auto ib = groups.find(b);
    if (ia == groups.end() || ib == groups.end()) continue;
    for (int i : ia->second) {
      for (int j : ib->second) edges.emplace_back(i, j);
    }
  }
  return ViewGraph::from_edges(kind, static_cast<int>(segmentation.size()), std::move(edges));
}

}  // namespace mvptm::views
