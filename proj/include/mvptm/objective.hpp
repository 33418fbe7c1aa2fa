#pragma once

// Training losses: classification cross-entropy, NT-Xent between views and
// their weighted sum.

#include <array>
#include <optional>
#include <span>
#include <string_view>

#include "mvptm/encoder.hpp"
#include "mvptm/numerics.hpp"

namespace mvptm::objective {

using numerics::Tensor;

/// SeqAnchor: psi_v contrasts SEQ with view v. Structural: psi_v contrasts
/// view v with the next enabled structural view (ast -> cfg -> dfg -> ast).
enum class Pairing { SeqAnchor, Structural };

std::string_view to_string(Pairing p);
std::optional<Pairing> parse_pairing(std::string_view name);

struct LossConfig {
  double lambda = 1.0;
  double tau = 0.1;
  Pairing pairing = Pairing::SeqAnchor;
  bool use_projection = true;
  bool contrastive = true;

  /// Throws Error(ConfigError) unless lambda >= 0 and tau > 0.
  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

struct LossBreakdown {
  double l_cls = 0.0;
  double psi_ast = 0.0;
  double psi_cfg = 0.0;
  double psi_dfg = 0.0;
  double l_contra = 0.0;
  double total = 0.0;
  bool contrastive_skipped = false;  // batch of one, or contrastive disabled
};

/// Differentiable terms plus their values. psi entries are undefined when the
/// term was not computed.
struct LossTerms {
  Tensor l_cls;
  std::array<Tensor, 3> psi;
  Tensor total;
  LossBreakdown breakdown;
};

/// Mean of -log softmax(logits)[label] over the batch. Throws LabelOutOfRange.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Standard 2B-row NT-Xent: each row's positive is its counterpart, the other
/// 2B-2 rows are negatives. Throws BatchTooSmall for B < 2.
Tensor nt_xent(const Tensor& anchors, const Tensor& positives, double tau);

/// psi_ast, psi_cfg, psi_dfg (undefined for disabled views).
/// Throws BatchTooSmall for a batch of one.
std::array<Tensor, 3> contrastive_total(const encoder::ViewRepresentation& vr, const encoder::Model& model,
                                        const LossConfig& config);

/// total = l_cls + lambda * (psi_ast + psi_cfg + psi_dfg).
LossTerms total_loss(const Tensor& l_cls, const std::array<Tensor, 3>& psi, double lambda);
LossBreakdown total_loss(double l_cls, const std::array<double, 3>& psi, double lambda);

/// Full objective for one forward pass. A batch of one skips the contrastive
/// term and sets breakdown.contrastive_skipped.
LossTerms compute_loss(const encoder::ViewRepresentation& vr, const Tensor& logits, std::span<const int> labels,
                       const encoder::Model& model, const LossConfig& config);

}  // namespace mvptm::objective
