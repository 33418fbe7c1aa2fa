#include <sstream>

#include "mvptm/views.hpp"

namespace mvptm::views {

namespace {

std::string dot_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::vector<char> adjacency(const ViewGraph& g, bool symmetrize) {
  const auto n = static_cast<std::size_t>(g.n);
  std::vector<char> allowed(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) allowed[i * n + i] = 1;
  for (auto [i, j] : g.edges) {
    allowed[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)] = 1;
    if (symmetrize) allowed[static_cast<std::size_t>(j) * n + static_cast<std::size_t>(i)] = 1;
  }
  return allowed;
}

}  // namespace

std::string_view to_string(ViewKind kind) {
  switch (kind) {
    case ViewKind::Seq: return "seq";
    case ViewKind::Ast: return "ast";
    case ViewKind::Cfg: return "cfg";
    case ViewKind::Dfg: return "dfg";
  }
  return "?";
}

std::optional<ViewKind> parse_view_kind(std::string_view name) {
  if (name == "seq") return ViewKind::Seq;
  if (name == "ast") return ViewKind::Ast;
  if (name == "cfg") return ViewKind::Cfg;
  if (name == "dfg") return ViewKind::Dfg;
  return std::nullopt;
}

std::string_view to_string(MaskMode mode) {
  return mode == MaskMode::Bias01 ? "bias01" : "neginf";
}

std::optional<MaskMode> parse_mask_mode(std::string_view name) {
  if (name == "bias01") return MaskMode::Bias01;
  if (name == "neginf") return MaskMode::NegInf;
  return std::nullopt;
}

bool ViewMask::allowed(int i, int j) const {
  return mode == MaskMode::Bias01 ? at(i, j) == 1.0 : at(i, j) == 0.0;
}

ViewMask to_mask(const ViewGraph& g, MaskMode mode, bool symmetrize) {
  const auto allowed = adjacency(g, symmetrize);
  const double yes = mode == MaskMode::Bias01 ? 1.0 : 0.0;
  const double no = mode == MaskMode::Bias01 ? 0.0 : -kNeg;
  ViewMask m{g.n, mode, std::vector<double>(allowed.size())};
  for (std::size_t k = 0; k < allowed.size(); ++k) m.bias[k] = allowed[k] ? yes : no;
  return m;
}

std::string export_dot(const ViewGraph& g, std::span<const std::string> token_texts) {
  auto label = [&](int i) {
    const std::string text =
        static_cast<std::size_t>(i) < token_texts.size() ? token_texts[static_cast<std::size_t>(i)]
                                                         : std::string();
    return "\"" + std::to_string(i) + ":" + dot_escape(text) + "\"";
  };
  std::ostringstream os;
  os << "digraph " << to_string(g.kind) << " {\n";
  for (int i = 0; i < g.n; ++i) os << "  " << label(i) << ";\n";
  for (auto [i, j] : g.edges) {
    if (i == j) continue;
    os << "  " << label(i) << " -> " << label(j) << ";\n";
  }
  os << "}\n";
  return os.str();
}

std::string format_matrix(const ViewGraph& g, bool symmetrize) {
  const auto allowed = adjacency(g, symmetrize);
  std::string out;
  const auto n = static_cast<std::size_t>(g.n);
  out.reserve(n * (2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j > 0) out += ' ';
      out += allowed[i * n + j] ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

}  // namespace mvptm::views
