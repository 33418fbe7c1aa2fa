#pragma once

// Structural views of a function (AST statement groups, control flow and
// data flow) as token-level graphs, plus their attention-mask encoding.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvptm/cfront.hpp"

namespace mvptm::views {

enum class ViewKind { Seq, Ast, Cfg, Dfg };

inline constexpr std::array<ViewKind, 3> kStructuralViews = {ViewKind::Ast, ViewKind::Cfg,
                                                             ViewKind::Dfg};

std::string_view to_string(ViewKind kind);
std::optional<ViewKind> parse_view_kind(std::string_view name);

/// Position of a structural view in per-view arrays (Ast = 0, Cfg = 1, Dfg = 2).
constexpr std::size_t slot(ViewKind kind) { return static_cast<std::size_t>(kind) - 1; }

using Edge = std::pair<int, int>;

/// Directed token-pair edges for one view. Edges are kept sorted and unique.
/// SEQ is never materialised.
struct ViewGraph {
  ViewKind kind = ViewKind::Ast;
  int n = 0;
  std::vector<Edge> edges;

  bool contains(int i, int j) const;
  static ViewGraph from_edges(ViewKind kind, int n, std::vector<Edge> edges);
};

/// Statement-level successor graph. The function entry is tracked separately
/// from the edge set; the pseudo-statement -1 has no control edges.
struct StmtGraph {
  std::vector<Edge> edges;
  int entry = -1;
};

/// (i, j) for every pair of tokens that share a statement, self-pairs included.
ViewGraph build_ast_view(std::span<const int> segmentation);

StmtGraph build_cfg(const cfront::FunctionAst& ast);

/// Value-provenance edges: each variable occurrence points at the most recent
/// preceding occurrence(s) of the same variable along some control path.
/// Plain writes start a new chain; parameters seed the first one.
ViewGraph build_dfg(const cfront::FunctionAst& ast);

/// Token-level projection of a statement graph; within-statement pairs are kept.
ViewGraph project(const StmtGraph& sg, std::span<const int> segmentation,
                  ViewKind kind = ViewKind::Cfg);

enum class MaskMode { Bias01, NegInf };

std::string_view to_string(MaskMode mode);
std::optional<MaskMode> parse_mask_mode(std::string_view name);

inline constexpr double kNeg = 1e9;

/// Additive attention bias, row-major n x n. NegInf: allowed 0, blocked -kNeg.
/// Bias01: allowed 1, blocked 0.
struct ViewMask {
  int n = 0;
  MaskMode mode = MaskMode::NegInf;
  std::vector<double> bias;

  double at(int i, int j) const { return bias[static_cast<std::size_t>(i) * n + j]; }
  bool allowed(int i, int j) const;
};

ViewMask to_mask(const ViewGraph& g, MaskMode mode = MaskMode::NegInf, bool symmetrize = false);

std::string export_dot(const ViewGraph& g, std::span<const std::string> token_texts);

/// Adjacency rows as '0'/'1' characters, one row per line (diagonal included).
std::string format_matrix(const ViewGraph& g, bool symmetrize = false);

/// One extracted function: token texts, label and the three structural views.
struct ViewRecord {
  std::vector<std::string> tokens;
  int label = 0;
  std::array<std::vector<Edge>, 3> views;  // indexed by slot()
  std::optional<std::vector<std::vector<double>>> embeddings;

  int n() const { return static_cast<int>(tokens.size()); }
  ViewGraph graph(ViewKind kind) const;

  bool operator==(const ViewRecord&) const = default;
};

std::string serialize_views(const ViewRecord& record);

/// Throws Error(SchemaError) on malformed lines, missing keys or bad indices.
ViewRecord parse_views(std::string_view line);

/// Everything computed for one function, for inspection and extraction.
struct FunctionViews {
  std::vector<cfront::Token> tokens;
  cfront::FunctionAst ast;
  std::vector<int> segmentation;
  StmtGraph cfg_statements;
  ViewGraph ast_view;
  ViewGraph cfg_view;
  ViewGraph dfg_view;

  const ViewGraph& graph(ViewKind kind) const;
};

FunctionViews analyze(std::string_view source);

/// Lex, parse and build all views. `symmetrize` adds reverse CFG/DFG edges.
ViewRecord extract(std::string_view source, int label, bool symmetrize = false);

}  // namespace mvptm::views
