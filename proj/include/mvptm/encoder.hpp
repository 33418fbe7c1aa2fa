#pragma once

// Backbone token encoder, structure-aware self-attention over the three
// structural views, masked mean pooling and the classifier MLP.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvptm/corpus.hpp"
#include "mvptm/numerics.hpp"
#include "mvptm/views.hpp"

namespace mvptm::encoder {

using numerics::Tensor;

enum class BackboneMode { TrainableMini, Precomputed };

std::string_view to_string(BackboneMode mode);
std::optional<BackboneMode> parse_backbone_mode(std::string_view name);

struct EncoderConfig {
  std::size_t vocab_size = 2;
  std::size_t d_model = 64;
  std::size_t backbone_layers = 2;
  std::size_t backbone_heads = 4;
  std::size_t shared_heads = 2;
  std::size_t specific_heads = 2;
  std::size_t mlp_hidden = 64;
  std::size_t ffn_hidden = 128;
  std::size_t max_len = 512;
  std::size_t proj_dim = 32;
  std::size_t precomputed_dim = 0;
  views::MaskMode mask_mode = views::MaskMode::NegInf;
  bool symmetrize = false;
  BackboneMode backbone_mode = BackboneMode::TrainableMini;
  bool shared_head_view_mask = true;  // false: H1 sees padding only
  bool per_view_output = false;       // one Wo per view instead of a shared one

  std::size_t head_dim() const { return d_model / (shared_heads + specific_heads); }
  /// Throws Error(ConfigError) on inconsistent sizes.
  void validate() const;

  bool operator==(const EncoderConfig&) const = default;
};

/// Named parameter tensors, iterated in name order.
using ModelParams = std::map<std::string, Tensor>;

/// Deep copy (fresh storage, no gradients).
ModelParams clone_params(const ModelParams& params);
std::size_t parameter_count(const ModelParams& params);

/// Per-view token matrices and pooled vectors, indexed by ViewKind.
struct ViewRepresentation {
  std::array<Tensor, 4> tokens;  // [B, n, d]
  std::array<Tensor, 4> pooled;  // [B, d]
  std::array<bool, 4> present{true, false, false, false};
};

using ViewSet = std::array<bool, 3>;  // enabled flags by views::slot()
inline constexpr ViewSet kAllViews{true, true, true};

class Model {
 public:
  /// Xavier-uniform initialisation from `seed`.
  Model(EncoderConfig config, std::uint64_t seed);
  Model(EncoderConfig config, ModelParams params);

  const EncoderConfig& config() const { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const Tensor& param(const std::string& name) const;

  /// Z: [B, n, d]. Throws LengthExceeded or MissingEmbeddings.
  Tensor backbone(const corpus::Batch& batch) const;

  /// Cat(H1, H2) before the output projection. z: [n, d] or [B, n, d];
  /// bias has z's leading shape with the last axis repeated.
  Tensor sasa_heads(const Tensor& z, const Tensor& view_bias, views::ViewKind view,
                    const Tensor& pad_bias = Tensor()) const;
  Tensor sasa(const Tensor& z, const Tensor& view_bias, views::ViewKind view,
              const Tensor& pad_bias = Tensor()) const;

  ViewRepresentation multi_view_forward(const Tensor& z, const corpus::Batch& batch,
                                        const ViewSet& enabled = kAllViews) const;

  /// [B, 2] logits. Disabled views contribute the SEQ pooled vector.
  Tensor classify(const ViewRepresentation& vr) const;

  /// Contrastive projection head d -> proj_dim (2 layers).
  Tensor project(const Tensor& pooled) const;

  Tensor forward(const corpus::Batch& batch, const ViewSet& enabled = kAllViews) const;

 private:
  EncoderConfig config_;
  ModelParams params_;
};

/// Scaled dot-product attention for one or more heads packed along the last
/// axis of q/k/v, each `head_dim` wide; result has the same packing.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& bias,
                            std::size_t heads, std::size_t head_dim);

}  // namespace mvptm::encoder
