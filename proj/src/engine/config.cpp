#include <fstream>
#include <set>
#include <sstream>

#include "mvptm/engine.hpp"
#include "mvptm/error.hpp"

namespace mvptm::engine {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

template <typename Enum>
Enum parse_enum(const json& v, const char* key, std::optional<Enum> (*parse)(std::string_view)) {
  if (!v.is_string()) bad(std::string(key) + ": expected a string");
  auto e = parse(v.get<std::string>());
  if (!e) bad(std::string(key) + ": unknown value \"" + v.get<std::string>() + "\"");
  return *e;
}

std::size_t count(const json& v, const char* key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    bad(std::string(key) + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

double real(const json& v, const char* key) {
  if (!v.is_number()) bad(std::string(key) + ": expected a number");
  return v.get<double>();
}

bool flag(const json& v, const char* key) {
  if (!v.is_boolean()) bad(std::string(key) + ": expected true or false");
  return v.get<bool>();
}

json view_list(const encoder::ViewSet& set) {
  json a = json::array();
  for (auto kind : views::kStructuralViews) {
    if (set[views::slot(kind)]) a.push_back(std::string(views::to_string(kind)));
  }
  return a;
}

encoder::ViewSet parse_view_list(const json& v) {
  if (!v.is_array()) bad("enabled_views: expected an array of view names");
  encoder::ViewSet set{false, false, false};
  for (const json& e : v) {
    if (!e.is_string()) bad("enabled_views: expected view names");
    auto kind = views::parse_view_kind(e.get<std::string>());
    if (!kind || *kind == views::ViewKind::Seq) bad("enabled_views: unknown view \"" + e.get<std::string>() + "\"");
    set[views::slot(*kind)] = true;
  }
  return set;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) bad("batch_size must be positive");
  if (!(lr > 0.0)) bad("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) bad("beta1 and beta2 must be in [0, 1)");
  if (!(eps > 0.0)) bad("eps must be positive");
}

corpus::MaskOptions mask_options(const encoder::EncoderConfig& config) {
  return {config.mask_mode, config.symmetrize};
}

json to_json(const RunConfig& c) {
  const auto& e = c.encoder;
  const auto& l = c.loss;
  const auto& t = c.train;
  return {
      {"vocab_size", e.vocab_size},
      {"d_model", e.d_model},
      {"backbone_layers", e.backbone_layers},
      {"backbone_heads", e.backbone_heads},
      {"shared_heads", e.shared_heads},
      {"specific_heads", e.specific_heads},
      {"mlp_hidden", e.mlp_hidden},
      {"ffn_hidden", e.ffn_hidden},
      {"max_len", e.max_len},
      {"proj_dim", e.proj_dim},
      {"precomputed_dim", e.precomputed_dim},
      {"mask_mode", std::string(views::to_string(e.mask_mode))},
      {"symmetrize", e.symmetrize},
      {"backbone_mode", std::string(encoder::to_string(e.backbone_mode))},
      {"shared_head_view_mask", e.shared_head_view_mask},
      {"per_view_output", e.per_view_output},
      {"lambda", l.lambda},
      {"tau", l.tau},
      {"pairing", std::string(objective::to_string(l.pairing))},
      {"use_projection", l.use_projection},
      {"contrastive", l.contrastive},
      {"epochs", t.epochs},
      {"batch_size", t.batch_size},
      {"lr", t.lr},
      {"beta1", t.beta1},
      {"beta2", t.beta2},
      {"eps", t.eps},
      {"seed", t.seed},
      {"enabled_views", view_list(t.enabled_views)},
      {"min_freq", t.min_freq},
      {"eval_train", t.eval_train},
  };
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  const json defaults = to_json(RunConfig{});
  for (const auto& [k, v] : defaults.items()) keys.push_back(k);
  return keys;
}

RunConfig config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) bad("config must be a JSON object");
  const auto known = config_keys();
  const std::set<std::string> known_set(known.begin(), known.end());
  std::vector<std::string> unknown;
  for (const auto& [k, v] : j.items()) {
    if (!known_set.contains(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::ostringstream msg;
    msg << "unknown config key(s):";
    for (const auto& k : unknown) msg << ' ' << k;
    msg << "\nknown keys:";
    for (const auto& k : known) msg << ' ' << k;
    bad(msg.str());
  }

  auto& e = c.encoder;
  auto& l = c.loss;
  auto& t = c.train;
  for (const auto& [key, v] : j.items()) {
    const char* k = key.c_str();
    if (key == "vocab_size") e.vocab_size = count(v, k);
    else if (key == "d_model") e.d_model = count(v, k);
    else if (key == "backbone_layers") e.backbone_layers = count(v, k);
    else if (key == "backbone_heads") e.backbone_heads = count(v, k);
    else if (key == "shared_heads") e.shared_heads = count(v, k);
    else if (key == "specific_heads") e.specific_heads = count(v, k);
    else if (key == "mlp_hidden") e.mlp_hidden = count(v, k);
    else if (key == "ffn_hidden") e.ffn_hidden = count(v, k);
    else if (key == "max_len") e.max_len = count(v, k);
    else if (key == "proj_dim") e.proj_dim = count(v, k);
    else if (key == "precomputed_dim") e.precomputed_dim = count(v, k);
    else if (key == "mask_mode") e.mask_mode = parse_enum<views::MaskMode>(v, k, views::parse_mask_mode);
    else if (key == "symmetrize") e.symmetrize = flag(v, k);
    else if (key == "backbone_mode") e.backbone_mode = parse_enum<encoder::BackboneMode>(v, k, encoder::parse_backbone_mode);
    else if (key == "shared_head_view_mask") e.shared_head_view_mask = flag(v, k);
    else if (key == "per_view_output") e.per_view_output = flag(v, k);
    else if (key == "lambda") l.lambda = real(v, k);
    else if (key == "tau") l.tau = real(v, k);
    else if (key == "pairing") l.pairing = parse_enum<objective::Pairing>(v, k, objective::parse_pairing);
    else if (key == "use_projection") l.use_projection = flag(v, k);
    else if (key == "contrastive") l.contrastive = flag(v, k);
    else if (key == "epochs") t.epochs = count(v, k);
    else if (key == "batch_size") t.batch_size = count(v, k);
    else if (key == "lr") t.lr = real(v, k);
    else if (key == "beta1") t.beta1 = real(v, k);
    else if (key == "beta2") t.beta2 = real(v, k);
    else if (key == "eps") t.eps = real(v, k);
    else if (key == "seed") t.seed = v.is_number_unsigned() ? v.get<std::uint64_t>() : count(v, k);
    else if (key == "enabled_views") t.enabled_views = parse_view_list(v);
    else if (key == "min_freq") t.min_freq = count(v, k);
    else if (key == "eval_train") t.eval_train = flag(v, k);
  }
  l.validate();
  t.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) bad("config " + path.string() + " is not valid JSON");
  return config_from_json(j, std::move(base));
}

}  // namespace mvptm::engine
