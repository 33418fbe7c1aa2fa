#include <cmath>
#include <sstream>

#include "mvptm/engine.hpp"
#include "mvptm/error.hpp"

namespace mvptm::engine {

using nlohmann::json;
namespace nx = numerics;

namespace {

std::vector<corpus::TokenizedFunction> encode_all(std::span<const views::ViewRecord> data,
                                                  const corpus::Vocab& vocab) {
  std::vector<corpus::TokenizedFunction> out;
  out.reserve(data.size());
  for (const auto& r : data) out.push_back(corpus::encode(r, vocab));
  return out;
}

std::vector<int> labels_of(std::span<const views::ViewRecord> data) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& r : data) labels.push_back(r.label);
  return labels;
}

std::vector<int> predict_encoded(const encoder::Model& model, std::span<const corpus::TokenizedFunction> fns,
                                 std::size_t batch_size, const encoder::ViewSet& enabled) {
  std::vector<int> out(fns.size(), 0);
  nx::NoGradScope no_grad;
  const auto masks = mask_options(model.config());
  for (const auto& batch : corpus::make_batches(fns, batch_size, 0, masks, false)) {
    const nx::Tensor logits = model.forward(batch, enabled);
    for (std::size_t s = 0; s < batch.size; ++s) out[batch.indices[s]] = predict(logits[2 * s], logits[2 * s + 1]);
  }
  return out;
}

[[noreturn]] void diverged(std::size_t epoch, std::size_t step, const objective::LossBreakdown& b) {
  std::ostringstream msg;
  msg << "non-finite loss at epoch " << epoch << " step " << step << ": l_cls=" << b.l_cls
      << " psi_ast=" << b.psi_ast << " psi_cfg=" << b.psi_cfg << " psi_dfg=" << b.psi_dfg << " total=" << b.total;
  throw Error(ErrorCode::DivergedLoss, msg.str());
}

}  // namespace

void Adam::step(encoder::ModelParams& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(c_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(c_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    auto& [m, v] = moments_[name];
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    auto g = p.grad();
    auto x = p.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = c_.beta1 * m[i] + (1.0 - c_.beta1) * g[i];
      v[i] = c_.beta2 * v[i] + (1.0 - c_.beta2) * g[i] * g[i];
      x[i] -= c_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + c_.eps);
    }
  }
}

json to_json(const EpochLog& log) {
  json j = {
      {"epoch", log.epoch},     {"l_cls", log.l_cls}, {"psi_ast", log.psi_ast},
      {"psi_cfg", log.psi_cfg}, {"psi_dfg", log.psi_dfg}, {"total", log.total},
      {"val_acc", log.valid.accuracy}, {"val_f1", log.valid.f1},
  };
  if (log.train) j["train_acc"] = log.train->accuracy;
  if (log.skipped_contrastive > 0) j["skipped_contrastive"] = log.skipped_contrastive;
  return j;
}

std::vector<int> predict_all(const encoder::Model& model, const corpus::Vocab& vocab,
                             std::span<const views::ViewRecord> data, std::size_t batch_size,
                             const encoder::ViewSet& enabled) {
  const auto fns = encode_all(data, vocab);
  return predict_encoded(model, fns, batch_size, enabled);
}

Metrics evaluate(const encoder::Model& model, const corpus::Vocab& vocab, std::span<const views::ViewRecord> data,
                 std::size_t batch_size, const encoder::ViewSet& enabled) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "nothing to evaluate");
  const auto predictions = predict_all(model, vocab, data, batch_size, enabled);
  const auto labels = labels_of(data);
  return compute_metrics(predictions, labels);
}

Metrics evaluate(const Checkpoint& ckpt, std::span<const views::ViewRecord> data) {
  const encoder::Model model = make_model(ckpt);
  return evaluate(model, ckpt.vocab, data, ckpt.config.train.batch_size, ckpt.config.train.enabled_views);
}

TrainResult train(const RunConfig& config, std::span<const views::ViewRecord> train_set,
                  std::span<const views::ViewRecord> valid_set, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  config.loss.validate();
  config.train.validate();

  RunConfig cfg = config;
  const corpus::Vocab vocab = corpus::Vocab::build(train_set, cfg.train.min_freq);
  cfg.encoder.vocab_size = vocab.size();

  nx::Rng rng(cfg.train.seed);
  encoder::Model model(cfg.encoder, rng.next());
  for (auto& [name, p] : model.params()) p.set_requires_grad(true);

  const auto train_fns = encode_all(train_set, vocab);
  const auto valid_fns = encode_all(valid_set, vocab);
  const auto train_labels = labels_of(train_set);
  const auto valid_labels = labels_of(valid_set);
  const auto masks = mask_options(cfg.encoder);
  const auto& enabled = cfg.train.enabled_views;

  Adam adam(cfg.train);
  TrainResult result;
  double best_f1 = -1.0;

  for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    const auto batches = corpus::make_batches(train_fns, cfg.train.batch_size, rng.next(), masks);
    EpochLog log;
    log.epoch = epoch;
    std::size_t step = 0;
    for (const auto& batch : batches) {
      ++step;
      nx::Tape tape;
      objective::LossTerms terms;
      {
        nx::TapeScope scope(tape);
        const nx::Tensor z = model.backbone(batch);
        const auto vr = model.multi_view_forward(z, batch, enabled);
        const nx::Tensor logits = model.classify(vr);
        terms = objective::compute_loss(vr, logits, batch.labels, model, cfg.loss);
      }
      const auto& b = terms.breakdown;
      if (!std::isfinite(b.total)) diverged(epoch, step, b);
      tape.backward(terms.total);
      adam.step(model.params());
      for (auto& [name, p] : model.params()) p.zero_grad();

      result.steps.push_back({epoch, step, b});
      if (b.contrastive_skipped && cfg.loss.contrastive) ++log.skipped_contrastive;
      log.l_cls += b.l_cls;
      log.psi_ast += b.psi_ast;
      log.psi_cfg += b.psi_cfg;
      log.psi_dfg += b.psi_dfg;
      log.total += b.total;
    }
    const double steps = static_cast<double>(batches.size());
    log.l_cls /= steps;
    log.psi_ast /= steps;
    log.psi_cfg /= steps;
    log.psi_dfg /= steps;
    log.total /= steps;

    if (!valid_fns.empty()) {
      log.valid = compute_metrics(predict_encoded(model, valid_fns, cfg.train.batch_size, enabled), valid_labels);
    }
    if (cfg.train.eval_train) {
      log.train = compute_metrics(predict_encoded(model, train_fns, cfg.train.batch_size, enabled), train_labels);
    }
    if (log.valid.f1 > best_f1) {
      best_f1 = log.valid.f1;
      result.best_epoch = epoch;
      result.best = Checkpoint{cfg, vocab, encoder::clone_params(model.params()), rng.state()};
    }
    result.epochs.push_back(log);
    if (on_epoch && !on_epoch(log)) break;
  }
  if (result.best_epoch == 0) {
    result.best = Checkpoint{cfg, vocab, encoder::clone_params(model.params()), rng.state()};
  }
  return result;
}

}  // namespace mvptm::engine
