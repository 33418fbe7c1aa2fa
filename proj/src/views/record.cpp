#include <algorithm>

#include "json.hpp"
#include "mvptm/error.hpp"
#include "mvptm/views.hpp"

namespace mvptm::views {

using nlohmann::json;

namespace {

constexpr const char* kViewKeys[] = {"ast", "cfg", "dfg"};

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorCode::SchemaError, what); }

}  // namespace

ViewGraph ViewRecord::graph(ViewKind kind) const {
  return ViewGraph::from_edges(kind, n(), views[slot(kind)]);
}

std::string serialize_views(const ViewRecord& record) {
  json j;
  j["tokens"] = record.tokens;
  j["label"] = record.label;
  json v = json::object();
  for (std::size_t k = 0; k < 3; ++k) {
    json edges = json::array();
    for (auto [a, b] : record.views[k]) edges.push_back({a, b});
    v[kViewKeys[k]] = std::move(edges);
  }
  j["views"] = std::move(v);
  if (record.embeddings) j["embeddings"] = *record.embeddings;
  return j.dump();
}

ViewRecord parse_views(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    schema(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) schema("record is not an object");
  for (const char* key : {"tokens", "label", "views"}) {
    if (!j.contains(key)) schema(std::string("missing key \"") + key + "\"");
  }
  ViewRecord r;
  try {
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.label = j.at("label").get<int>();
  } catch (const json::exception& e) {
    schema(e.what());
  }
  if (r.label != 0 && r.label != 1) schema("label must be 0 or 1");
  const json& v = j.at("views");
  if (!v.is_object()) schema("\"views\" is not an object");
  const int n = r.n();
  for (std::size_t k = 0; k < 3; ++k) {
    if (!v.contains(kViewKeys[k])) continue;
    const json& edges = v.at(kViewKeys[k]);
    if (!edges.is_array()) schema(std::string("view \"") + kViewKeys[k] + "\" is not an array");
    for (const json& e : edges) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer()) {
        schema(std::string("malformed edge in view \"") + kViewKeys[k] + "\"");
      }
      const int a = e[0].get<int>();
      const int b = e[1].get<int>();
      if (a < 0 || b < 0 || a >= n || b >= n) {
        schema("edge (" + std::to_string(a) + "," + std::to_string(b) + ") out of range for n=" +
               std::to_string(n));
      }
      r.views[k].emplace_back(a, b);
    }
  }
  if (j.contains("embeddings")) {
    try {
      r.embeddings = j.at("embeddings").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
      schema(e.what());
    }
    if (static_cast<int>(r.embeddings->size()) != n) {
      schema("embeddings row count differs from token count");
    }
  }
  return r;
}

const ViewGraph& FunctionViews::graph(ViewKind kind) const {
  switch (kind) {
    case ViewKind::Cfg: return cfg_view;
    case ViewKind::Dfg: return dfg_view;
    default: return ast_view;
  }
}

FunctionViews analyze(std::string_view source) {
  FunctionViews fv;
  fv.tokens = cfront::lex(source);
  fv.ast = cfront::parse(fv.tokens);
  fv.segmentation = cfront::segment(fv.ast);
  fv.cfg_statements = build_cfg(fv.ast);
  fv.ast_view = build_ast_view(fv.segmentation);
  fv.cfg_view = project(fv.cfg_statements, fv.segmentation, ViewKind::Cfg);
  fv.dfg_view = build_dfg(fv.ast);
  return fv;
}

ViewRecord extract(std::string_view source, int label, bool symmetrize) {
  FunctionViews fv = analyze(source);
  ViewRecord r;
  r.label = label;
  r.tokens.reserve(fv.tokens.size());
  for (const auto& t : fv.tokens) r.tokens.push_back(t.text);
  r.views[slot(ViewKind::Ast)] = std::move(fv.ast_view.edges);
  r.views[slot(ViewKind::Cfg)] = std::move(fv.cfg_view.edges);
  r.views[slot(ViewKind::Dfg)] = std::move(fv.dfg_view.edges);
  if (symmetrize) {
    for (ViewKind k : {ViewKind::Cfg, ViewKind::Dfg}) {
      auto& edges = r.views[slot(k)];
      const std::size_t m = edges.size();
      for (std::size_t i = 0; i < m; ++i) edges.emplace_back(edges[i].second, edges[i].first);
      r.views[slot(k)] = ViewGraph::from_edges(k, r.n(), std::move(edges)).edges;
    }
  }
  return r;
}

}  // namespace mvptm::views
