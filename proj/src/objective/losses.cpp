#include <string>

#include "mvptm/error.hpp"
#include "mvptm/objective.hpp"

namespace mvptm::objective {

namespace nx = numerics;

std::string_view to_string(Pairing p) { return p == Pairing::SeqAnchor ? "seq-anchor" : "structural"; }

std::optional<Pairing> parse_pairing(std::string_view name) {
  if (name == "seq-anchor") return Pairing::SeqAnchor;
  if (name == "structural") return Pairing::Structural;
  return std::nullopt;
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::ConfigError, "lambda must be >= 0");
  if (!(tau > 0.0)) throw Error(ErrorCode::ConfigError, "tau must be > 0");
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  return nx::softmax_cross_entropy(logits, labels);
}

Tensor nt_xent(const Tensor& anchors, const Tensor& positives, double tau) {
  if (anchors.rank() != 2 || anchors.shape() != positives.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "nt_xent: " + nx::shape_string(anchors.shape()) + " vs " +
                                              nx::shape_string(positives.shape()));
  }
  const std::size_t b = anchors.dim(0);
  if (b < 2) throw Error(ErrorCode::BatchTooSmall, "nt_xent needs at least 2 samples, got " + std::to_string(b));
  const std::size_t rows = 2 * b;

  const Tensor z = nx::l2_normalize_rows(nx::concat_rows(anchors, positives));
  const Tensor sim = nx::scale(nx::matmul(z, nx::transpose_last(z)), 1.0 / tau);

  Tensor self = Tensor::zeros({rows, rows});
  for (std::size_t i = 0; i < rows; ++i) self[i * rows + i] = -views::kNeg;
  std::vector<int> targets(rows);
  for (std::size_t i = 0; i < rows; ++i) targets[i] = static_cast<int>(i < b ? i + b : i - b);
  return nx::softmax_cross_entropy(sim, targets, self);
}

std::array<Tensor, 3> contrastive_total(const encoder::ViewRepresentation& vr, const encoder::Model& model,
                                        const LossConfig& config) {
  const std::size_t b = vr.pooled[0].dim(0);
  if (b < 2) throw Error(ErrorCode::BatchTooSmall, "contrastive term needs at least 2 samples");

  std::array<Tensor, 4> z;
  for (std::size_t k = 0; k < 4; ++k) {
    if (!vr.present[k]) continue;
    z[k] = config.use_projection ? model.project(vr.pooled[k]) : vr.pooled[k];
  }
  std::array<Tensor, 3> psi;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t k = s + 1;
    if (!vr.present[k]) continue;
    std::size_t partner = 0;
    if (config.pairing == Pairing::Structural) {
      for (std::size_t step = 1; step < 3; ++step) {
        const std::size_t other = (s + step) % 3 + 1;
        if (vr.present[other]) {
          partner = other;
          break;
        }
      }
    }
    psi[s] = partner == 0 ? nt_xent(z[0], z[k], config.tau) : nt_xent(z[k], z[partner], config.tau);
  }
  return psi;
}

LossTerms total_loss(const Tensor& l_cls, const std::array<Tensor, 3>& psi, double lambda) {
  LossTerms out;
  out.l_cls = l_cls;
  out.psi = psi;
  out.breakdown.l_cls = l_cls.item();

  Tensor contra;
  std::array<double*, 3> slots{&out.breakdown.psi_ast, &out.breakdown.psi_cfg, &out.breakdown.psi_dfg};
  for (std::size_t s = 0; s < 3; ++s) {
    if (!psi[s].defined()) continue;
    *slots[s] = psi[s].item();
    contra = contra.defined() ? nx::add(contra, psi[s]) : psi[s];
  }
  if (!contra.defined()) {
    out.total = l_cls;
    out.breakdown.total = out.breakdown.l_cls;
    return out;
  }
  out.breakdown.l_contra = contra.item();
  out.total = nx::add(l_cls, nx::scale(contra, lambda));
  out.breakdown.total = out.total.item();
  return out;
}

LossBreakdown total_loss(double l_cls, const std::array<double, 3>& psi, double lambda) {
  LossBreakdown b;
  b.l_cls = l_cls;
  b.psi_ast = psi[0];
  b.psi_cfg = psi[1];
  b.psi_dfg = psi[2];
  b.l_contra = psi[0] + psi[1] + psi[2];
  b.total = l_cls + lambda * b.l_contra;
  return b;
}

LossTerms compute_loss(const encoder::ViewRepresentation& vr, const Tensor& logits, std::span<const int> labels,
                       const encoder::Model& model, const LossConfig& config) {
  const Tensor l_cls = cross_entropy(logits, labels);
  if (!config.contrastive) {
    LossTerms t = total_loss(l_cls, {}, config.lambda);
    t.breakdown.contrastive_skipped = true;
    return t;
  }
  if (labels.size() < 2) {
    LossTerms t = total_loss(l_cls, {}, config.lambda);
    t.breakdown.contrastive_skipped = true;
    return t;
  }
  return total_loss(l_cls, contrastive_total(vr, model, config), config.lambda);
}

}  // namespace mvptm::objective
