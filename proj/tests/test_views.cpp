#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "mvptm/error.hpp"
#include "mvptm/views.hpp"
#include "support/synthetic.hpp"

using namespace mvptm;
using namespace mvptm::views;

namespace {

const char* kBranch = "int f(int a,int b){ if(a>3) b=a-b; return b; }";

std::set<Edge> edge_set(const ViewGraph& g) { return {g.edges.begin(), g.edges.end()}; }

std::vector<std::string> sources() {
  std::vector<std::string> out = {
      kBranch,
      "void g(){}",
      "int w(int x) { while (x > 0) { if (x == 3) break; x--; continue; } do { x++; } while (x < 2); return x; }",
      "static int sum(const int *xs, unsigned n) { int s = 0; for (unsigned i = 0; i < n; i++) s += xs[i]; return s; }",
      "int s(int k) { switch (k) { case 1: return 2; default: break; } goto out; out: return k; }",
  };
  for (const auto& r : testing::synthetic_records(12)) out.push_back(r.source);
  return out;
}

int count_within(const std::vector<int>& seg, int stmt) {
  return static_cast<int>(std::count(seg.begin(), seg.end(), stmt));
}

}  // namespace

TEST_CASE("ast view: statement groups") {
  const std::vector<int> seg{-1, -1, 0, 0, 0, 1};
  const auto g = build_ast_view(seg);
  int among_234 = 0;
  for (const auto& [i, j] : g.edges) {
    if (i >= 2 && i <= 4 && j >= 2 && j <= 4) ++among_234;
    if (i == 5 || j == 5) CHECK((i == 5 && j == 5));
  }
  CHECK(among_234 == 9);
  CHECK(g.contains(5, 5));
}

TEST_CASE("ast view: branch snippet pair counts") {
  const auto fv = analyze(kBranch);
  // "a>3" is 3 tokens and "b=a-b;" is 6 lexemes, so 9 + 36 pairs.
  CHECK(count_within(fv.segmentation, 0) == 3);
  CHECK(count_within(fv.segmentation, 1) == 6);
  CHECK(count_within(fv.segmentation, 2) == 3);
  std::map<int, int> pairs;
  for (const auto& [i, j] : fv.ast_view.edges) {
    const int si = fv.segmentation[static_cast<std::size_t>(i)];
    CHECK(si == fv.segmentation[static_cast<std::size_t>(j)]);
    ++pairs[si];
  }
  CHECK(pairs[0] == 9);
  CHECK(pairs[1] == 36);
  CHECK(pairs[2] == 9);
}

TEST_CASE("ast view is an equivalence relation") {
  for (const auto& src : sources()) {
    const auto fv = analyze(src);
    const auto& g = fv.ast_view;
    for (int i = 0; i < g.n; ++i) CHECK(g.contains(i, i));
    for (const auto& [i, j] : g.edges) CHECK(g.contains(j, i));
    // Transitivity follows if every edge joins tokens of one segment and
    // every such pair is present.
    for (int i = 0; i < g.n; ++i) {
      for (int j = 0; j < g.n; ++j) {
        const bool same = fv.segmentation[static_cast<std::size_t>(i)] == fv.segmentation[static_cast<std::size_t>(j)];
        CHECK(g.contains(i, j) == same);
      }
    }
  }
}

TEST_CASE("cfg: straight line, branch and loop") {
  {
    const auto sg = build_cfg(cfront::parse(cfront::lex("void f(){ a=1; b=2; c=3; }")));
    CHECK(sg.edges == std::vector<Edge>{{0, 1}, {1, 2}});
    CHECK(sg.entry == 0);
  }
  {
    const auto sg = build_cfg(cfront::parse(cfront::lex(kBranch)));
    CHECK(sg.edges == std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}});
  }
  {
    const auto sg = build_cfg(cfront::parse(cfront::lex("void f(int c){ while(c){x=1;} y=2; }")));
    CHECK(std::set<Edge>(sg.edges.begin(), sg.edges.end()) == std::set<Edge>{{0, 1}, {1, 0}, {0, 2}});
  }
}

TEST_CASE("cfg: if/else, break, continue, return") {
  // s0 if(c) s1 x=1 s2 y=2 s3 return
  const auto sg = build_cfg(cfront::parse(cfront::lex("int f(int c){ if(c) x=1; else y=2; return x; }")));
  CHECK(std::set<Edge>(sg.edges.begin(), sg.edges.end()) == std::set<Edge>{{0, 1}, {0, 2}, {1, 3}, {2, 3}});

  // s0 while s1 if s2 break s3 continue s4 z=1
  const auto loop = build_cfg(cfront::parse(cfront::lex("void f(int c){ while(c){ if(c) break; continue; } z=1; }")));
  const std::set<Edge> got(loop.edges.begin(), loop.edges.end());
  CHECK(got.contains({2, 4}));
  CHECK(got.contains({3, 0}));
  CHECK(got.contains({0, 4}));
  CHECK(!got.contains({2, 3}));

  const auto ret = build_cfg(cfront::parse(cfront::lex("int f(){ return 1; x=2; }")));
  CHECK(ret.edges.empty());
}

TEST_CASE("dfg: branch snippet provenance") {
  const auto fv = analyze(kBranch);
  CHECK(fv.tokens[18].text == "a");
  CHECK(fv.tokens[12].text == "a");
  CHECK(fv.dfg_view.contains(18, 12));
  bool both_a = false;
  for (const auto& [i, j] : fv.dfg_view.edges) {
    if (fv.tokens[static_cast<std::size_t>(i)].text == "a" && fv.tokens[static_cast<std::size_t>(j)].text == "a") both_a = true;
  }
  CHECK(both_a);
}

TEST_CASE("dfg: def-use and unused declarations") {
  // void0 f1 (2 )3 {4 x5 =6 17 ;8 y9 =10 x11 +12 x13 ;14 }15
  const auto fv = analyze("void f(){x=1;y=x+x;}");
  CHECK(fv.dfg_view.contains(11, 5));
  CHECK(fv.dfg_view.contains(13, 5));

  // void0 f1 (2 )3 {4 int5 u6 ;7 return8 ;9 }10
  const auto unused = analyze("void f(){int u;return;}");
  for (const auto& [i, j] : unused.dfg_view.edges) CHECK(i == j);
}

TEST_CASE("dfg: edges point backward in straight-line code") {
  const std::vector<std::string> straight = {
      "int f(int a,int b){ int c = a + b; c = c * a; b = c - b; return b + c; }",
      "void g(int n){ x = n; y = x; z = y + x + n; w = z; }",
  };
  for (const auto& src : straight) {
    const auto fv = analyze(src);
    CHECK(!fv.dfg_view.edges.empty());
    for (const auto& [i, j] : fv.dfg_view.edges) CHECK(i > j);
  }
}

TEST_CASE("project: rule examples") {
  const std::vector<int> seg{0, 1, 1};
  const auto g = project(StmtGraph{{{0, 1}}, 0}, seg);
  CHECK(edge_set(g) == std::set<Edge>{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 1}, {2, 2}});
  const auto empty = project(StmtGraph{}, seg);
  CHECK(edge_set(empty) == std::set<Edge>{{0, 0}, {1, 1}, {1, 2}, {2, 1}, {2, 2}});

  const auto fv = analyze(kBranch);
  for (int i : {12, 13, 14}) {
    for (int j = 16; j <= 21; ++j) CHECK(fv.cfg_view.contains(i, j));
  }
}

TEST_CASE("to_mask: examples") {
  const auto one = ViewGraph::from_edges(ViewKind::Cfg, 2, {{0, 1}});
  CHECK(to_mask(one).bias == std::vector<double>{0, 0, -1e9, 0});
  CHECK(to_mask(one, MaskMode::Bias01).bias == std::vector<double>{1, 1, 0, 1});
  CHECK(to_mask(one, MaskMode::NegInf, true).bias == std::vector<double>{0, 0, 0, 0});
  const auto none = ViewGraph::from_edges(ViewKind::Cfg, 2, {});
  CHECK(to_mask(none).bias == std::vector<double>{0, -1e9, -1e9, 0});
}

TEST_CASE("to_mask: modes agree and diagonal is allowed") {
  for (const auto& src : sources()) {
    const auto fv = analyze(src);
    for (auto kind : kStructuralViews) {
      for (bool sym : {false, true}) {
        const auto neg = to_mask(fv.graph(kind), MaskMode::NegInf, sym);
        const auto b01 = to_mask(fv.graph(kind), MaskMode::Bias01, sym);
        for (int i = 0; i < neg.n; ++i) {
          CHECK(neg.at(i, i) == 0.0);
          for (int j = 0; j < neg.n; ++j) {
            CHECK((b01.at(i, j) == 1.0) == (neg.at(i, j) == 0.0));
            CHECK((neg.at(i, j) == 0.0 || neg.at(i, j) == -kNeg));
            if (sym) CHECK(neg.at(i, j) == neg.at(j, i));
          }
        }
      }
    }
  }
}

TEST_CASE("export_dot") {
  const std::vector<std::string> ab{"a", "b"};
  const auto dot = export_dot(ViewGraph::from_edges(ViewKind::Dfg, 2, {{0, 1}}), ab);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("\"0:a\" -> \"1:b\"") != std::string::npos);
  const auto bare = export_dot(ViewGraph::from_edges(ViewKind::Dfg, 2, {}), ab);
  CHECK(bare.find("->") == std::string::npos);
  CHECK(bare.find("\"1:b\"") != std::string::npos);
  CHECK(export_dot(ViewGraph::from_edges(ViewKind::Dfg, 2, {{0, 1}}), ab) == dot);
}

TEST_CASE("view records round-trip") {
  for (const auto& src : sources()) {
    for (bool sym : {false, true}) {
      const auto rec = extract(src, 1, sym);
      CHECK(parse_views(serialize_views(rec)) == rec);
    }
  }
  ViewRecord with_emb = extract("void f(){x=1;}", 0);
  with_emb.embeddings = std::vector<std::vector<double>>(static_cast<std::size_t>(with_emb.n()), {0.25, -1.5});
  CHECK(parse_views(serialize_views(with_emb)) == with_emb);
}

TEST_CASE("view records: schema errors") {
  auto code = [](const std::string& line) {
    try {
      parse_views(line);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ShapeMismatch;
  };
  CHECK(code(R"({"tokens":["a","b"],"label":0,"views":{"ast":[[0,2]]}})") == ErrorCode::SchemaError);
  CHECK(code(R"({"tokens":["a","b"],"label":0})") == ErrorCode::SchemaError);
  CHECK(code(R"({"label":0,"views":{}})") == ErrorCode::SchemaError);
  CHECK(code(R"({"tokens":["a"],"label":0,"views":{"cfg":[[-1,0]]}})") == ErrorCode::SchemaError);
  CHECK(code("not json") == ErrorCode::SchemaError);

  const auto rec = parse_views(R"({"tokens":["a","b"],"label":1,"views":{}})");
  CHECK(rec.label == 1);
  for (const auto& v : rec.views) CHECK(v.empty());
}
