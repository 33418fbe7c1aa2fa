#include <cmath>
#include <utility>

#include "mvptm/encoder.hpp"
#include "mvptm/error.hpp"

namespace mvptm::encoder {

using numerics::Shape;
namespace nx = numerics;

namespace {

enum class Init { Xavier, Embedding, Ones, Zeros };

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init;
};

constexpr std::array<std::string_view, 3> kViewNames = {"ast", "cfg", "dfg"};

std::vector<ParamSpec> layout(const EncoderConfig& c) {
  const std::size_t d = c.d_model;
  const std::size_t dh = c.head_dim();
  std::vector<ParamSpec> specs;
  auto mat = [&](std::string name, std::size_t in, std::size_t out) {
    specs.push_back({std::move(name), {in, out}, Init::Xavier});
  };
  auto vec = [&](std::string name, std::size_t len, Init init = Init::Zeros) {
    specs.push_back({std::move(name), {len}, init});
  };

  if (c.backbone_mode == BackboneMode::TrainableMini) {
    specs.push_back({"tok_embedding", {c.vocab_size, d}, Init::Embedding});
    specs.push_back({"pos_embedding", {c.max_len, d}, Init::Embedding});
    vec("emb_ln.gamma", d, Init::Ones);
    vec("emb_ln.beta", d);
    for (std::size_t l = 0; l < c.backbone_layers; ++l) {
      const std::string p = "backbone." + std::to_string(l) + ".";
      for (const char* w : {"q", "k", "v", "o"}) {
        mat(p + "w" + w, d, d);
        vec(p + "b" + w, d);
      }
      vec(p + "ln1.gamma", d, Init::Ones);
      vec(p + "ln1.beta", d);
      mat(p + "ffn.w1", d, c.ffn_hidden);
      vec(p + "ffn.b1", c.ffn_hidden);
      mat(p + "ffn.w2", c.ffn_hidden, d);
      vec(p + "ffn.b2", d);
      vec(p + "ln2.gamma", d, Init::Ones);
      vec(p + "ln2.beta", d);
    }
  } else {
    mat("input_proj.w", c.precomputed_dim, d);
    vec("input_proj.b", d);
  }

  for (const char* w : {"wq", "wk", "wv"}) mat(std::string("sasa.shared.") + w, d, c.shared_heads * dh);
  for (auto v : kViewNames) {
    for (const char* w : {"wq", "wk", "wv"}) {
      mat("sasa." + std::string(v) + "." + w, d, c.specific_heads * dh);
    }
  }
  const std::size_t cat = (c.shared_heads + c.specific_heads) * dh;
  if (c.per_view_output) {
    for (auto v : kViewNames) mat("sasa." + std::string(v) + ".wo", cat, d);
  } else {
    mat("sasa.wo", cat, d);
  }

  mat("proj.w1", d, d);
  vec("proj.b1", d);
  mat("proj.w2", d, c.proj_dim);
  vec("proj.b2", c.proj_dim);

  mat("cls.w1", 4 * d, c.mlp_hidden);
  vec("cls.b1", c.mlp_hidden);
  mat("cls.w2", c.mlp_hidden, 2);
  vec("cls.b2", 2);
  return specs;
}

void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, "encoder config: " + what); }

std::string view_name(views::ViewKind view) {
  if (view == views::ViewKind::Seq) {
    throw Error(ErrorCode::ShapeMismatch, "sasa: SEQ is not a structural view");
  }
  return std::string(kViewNames[views::slot(view)]);
}

}  // namespace

std::string_view to_string(BackboneMode mode) {
  return mode == BackboneMode::TrainableMini ? "trainable-mini" : "precomputed";
}

std::optional<BackboneMode> parse_backbone_mode(std::string_view name) {
  if (name == "trainable-mini") return BackboneMode::TrainableMini;
  if (name == "precomputed") return BackboneMode::Precomputed;
  return std::nullopt;
}

void EncoderConfig::validate() const {
  if (d_model == 0) config_error("d_model must be positive");
  if (shared_heads == 0 || specific_heads == 0) config_error("shared_heads and specific_heads must be positive");
  if (d_model % (shared_heads + specific_heads) != 0) {
    config_error("d_model must be divisible by shared_heads + specific_heads");
  }
  if (max_len == 0 || max_len > corpus::kMaxTokens) config_error("max_len must be in [1, 512]");
  if (mlp_hidden == 0 || proj_dim == 0) config_error("mlp_hidden and proj_dim must be positive");
  if (backbone_mode == BackboneMode::TrainableMini) {
    if (vocab_size < 2) config_error("vocab_size must cover the reserved ids");
    if (backbone_layers > 0) {
      if (backbone_heads == 0 || d_model % backbone_heads != 0) {
        config_error("d_model must be divisible by backbone_heads");
      }
      if (ffn_hidden == 0) config_error("ffn_hidden must be positive");
    }
  } else if (precomputed_dim == 0) {
    config_error("precomputed mode needs precomputed_dim");
  }
}

ModelParams clone_params(const ModelParams& params) {
  ModelParams out;
  for (const auto& [name, t] : params) out.emplace(name, t.clone());
  return out;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t total = 0;
  for (const auto& [name, t] : params) total += t.size();
  return total;
}

Model::Model(EncoderConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  nx::Rng rng(seed);
  for (const auto& spec : layout(config_)) {
    std::vector<double> data(nx::element_count(spec.shape), 0.0);
    switch (spec.init) {
      case Init::Xavier: {
        const double a = std::sqrt(6.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
        for (double& x : data) x = rng.uniform(-a, a);
        break;
      }
      case Init::Embedding:
        for (double& x : data) x = rng.uniform(-0.1, 0.1);
        break;
      case Init::Ones:
        std::fill(data.begin(), data.end(), 1.0);
        break;
      case Init::Zeros:
        break;
    }
    params_.emplace(spec.name, Tensor(spec.shape, std::move(data)));
  }
}

Model::Model(EncoderConfig config, ModelParams params) : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto specs = layout(config_);
  if (specs.size() != params_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "model: expected " + std::to_string(specs.size()) +
                                              " parameter tensors, got " + std::to_string(params_.size()));
  }
  for (const auto& spec : specs) {
    auto it = params_.find(spec.name);
    if (it == params_.end()) throw Error(ErrorCode::ShapeMismatch, "model: missing parameter " + spec.name);
    if (it->second.shape() != spec.shape) {
      throw Error(ErrorCode::ShapeMismatch, "model: parameter " + spec.name + " has shape " +
                                                nx::shape_string(it->second.shape()) + ", expected " +
                                                nx::shape_string(spec.shape));
    }
  }
}

const Tensor& Model::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorCode::ShapeMismatch, "model: no parameter " + name);
  return it->second;
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& bias,
                            std::size_t heads, std::size_t head_dim) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = nx::slice_last(q, h * head_dim, head_dim);
    const Tensor kh = nx::slice_last(k, h * head_dim, head_dim);
    const Tensor vh = nx::slice_last(v, h * head_dim, head_dim);
    const Tensor logits = nx::scale(nx::matmul(qh, nx::transpose_last(kh)), inv);
    outs.push_back(nx::matmul(nx::softmax_bias(logits, bias), vh));
  }
  return heads == 1 ? outs.front() : nx::concat_last(outs);
}

Tensor Model::backbone(const corpus::Batch& batch) const {
  const std::size_t B = batch.size;
  const std::size_t n = batch.n;
  if (n > config_.max_len) {
    throw Error(ErrorCode::LengthExceeded, "backbone: sequence of " + std::to_string(n) +
                                               " tokens exceeds max_len " + std::to_string(config_.max_len));
  }
  const std::size_t d = config_.d_model;

  if (config_.backbone_mode == BackboneMode::Precomputed) {
    if (!batch.embeddings.defined()) {
      throw Error(ErrorCode::MissingEmbeddings, "backbone: precomputed mode needs per-token vectors");
    }
    if (batch.embeddings.shape() != Shape{B, n, config_.precomputed_dim}) {
      throw Error(ErrorCode::MissingEmbeddings,
                  "backbone: embeddings have shape " + nx::shape_string(batch.embeddings.shape()) +
                      ", expected last axis " + std::to_string(config_.precomputed_dim));
    }
    return nx::linear(batch.embeddings, param("input_proj.w"), param("input_proj.b"));
  }

  std::vector<int> positions(B * n);
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i % n);
  Tensor x = nx::add(nx::embedding(param("tok_embedding"), batch.token_ids, {B, n}),
                     nx::embedding(param("pos_embedding"), positions, {B, n}));
  x = nx::layer_norm(x, param("emb_ln.gamma"), param("emb_ln.beta"));

  const std::size_t heads = config_.backbone_heads;
  for (std::size_t l = 0; l < config_.backbone_layers; ++l) {
    const std::string p = "backbone." + std::to_string(l) + ".";
    const Tensor q = nx::linear(x, param(p + "wq"), param(p + "bq"));
    const Tensor k = nx::linear(x, param(p + "wk"), param(p + "bk"));
    const Tensor v = nx::linear(x, param(p + "wv"), param(p + "bv"));
    const Tensor att = multi_head_attention(q, k, v, batch.pad_bias, heads, d / heads);
    x = nx::layer_norm(nx::add(x, nx::linear(att, param(p + "wo"), param(p + "bo"))), param(p + "ln1.gamma"),
                       param(p + "ln1.beta"));
    const Tensor h = nx::gelu(nx::linear(x, param(p + "ffn.w1"), param(p + "ffn.b1")));
    x = nx::layer_norm(nx::add(x, nx::linear(h, param(p + "ffn.w2"), param(p + "ffn.b2"))), param(p + "ln2.gamma"),
                       param(p + "ln2.beta"));
  }
  return x;
}

Tensor Model::sasa_heads(const Tensor& z, const Tensor& view_bias, views::ViewKind view,
                         const Tensor& pad_bias) const {
  const std::string v = view_name(view);
  const std::size_t d = config_.d_model;
  const std::size_t dh = config_.head_dim();
  if (z.rank() < 2 || z.dim(z.rank() - 1) != d) {
    throw Error(ErrorCode::ShapeMismatch, "sasa: Z has shape " + nx::shape_string(z.shape()));
  }
  Shape want(z.shape().begin(), z.shape().end() - 1);
  want.push_back(z.dim(z.rank() - 2));
  if (view_bias.shape() != want) {
    throw Error(ErrorCode::ShapeMismatch, "sasa: mask shape " + nx::shape_string(view_bias.shape()) +
                                              " does not match Z " + nx::shape_string(z.shape()));
  }

  Tensor shared_bias = view_bias;
  if (!config_.shared_head_view_mask) {
    shared_bias = pad_bias.defined() ? pad_bias : Tensor::zeros(want);
  }
  auto heads = [&](const std::string& prefix, const Tensor& bias, std::size_t count) {
    return multi_head_attention(nx::matmul(z, param(prefix + "wq")), nx::matmul(z, param(prefix + "wk")),
                                nx::matmul(z, param(prefix + "wv")), bias, count, dh);
  };
  const Tensor h1 = heads("sasa.shared.", shared_bias, config_.shared_heads);
  const Tensor h2 = heads("sasa." + v + ".", view_bias, config_.specific_heads);
  const std::array<Tensor, 2> parts{h1, h2};
  return nx::concat_last(parts);
}

Tensor Model::sasa(const Tensor& z, const Tensor& view_bias, views::ViewKind view, const Tensor& pad_bias) const {
  const Tensor cat = sasa_heads(z, view_bias, view, pad_bias);
  const std::string wo = config_.per_view_output ? "sasa." + view_name(view) + ".wo" : "sasa.wo";
  return nx::matmul(cat, param(wo));
}

ViewRepresentation Model::multi_view_forward(const Tensor& z, const corpus::Batch& batch,
                                             const ViewSet& enabled) const {
  ViewRepresentation vr;
  vr.tokens[0] = z;
  vr.pooled[0] = nx::mean_pool(z, batch.keep);
  for (auto view : views::kStructuralViews) {
    const std::size_t s = views::slot(view);
    const std::size_t k = static_cast<std::size_t>(view);
    if (!enabled[s]) continue;
    vr.tokens[k] = sasa(z, batch.view_bias[s], view, batch.pad_bias);
    vr.pooled[k] = nx::mean_pool(vr.tokens[k], batch.keep);
    vr.present[k] = true;
  }
  return vr;
}

Tensor Model::classify(const ViewRepresentation& vr) const {
  std::array<Tensor, 4> parts;
  for (std::size_t k = 0; k < 4; ++k) parts[k] = vr.present[k] ? vr.pooled[k] : vr.pooled[0];
  const Tensor h = nx::gelu(nx::linear(nx::concat_last(parts), param("cls.w1"), param("cls.b1")));
  return nx::linear(h, param("cls.w2"), param("cls.b2"));
}

Tensor Model::project(const Tensor& pooled) const {
  const Tensor h = nx::gelu(nx::linear(pooled, param("proj.w1"), param("proj.b1")));
  return nx::linear(h, param("proj.w2"), param("proj.b2"));
}

Tensor Model::forward(const corpus::Batch& batch, const ViewSet& enabled) const {
  return classify(multi_view_forward(backbone(batch), batch, enabled));
}

}  // namespace mvptm::encoder
