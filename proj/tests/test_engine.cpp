#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include <unistd.h>

#include "doctest.h"
#include "mvptm/engine.hpp"
#include "mvptm/error.hpp"
#include "support/synthetic.hpp"

using namespace mvptm;
using namespace mvptm::engine;
using nlohmann::json;
namespace nx = mvptm::numerics;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.encoder.d_model = 16;
  c.encoder.backbone_layers = 1;
  c.encoder.backbone_heads = 2;
  c.encoder.mlp_hidden = 16;
  c.encoder.ffn_hidden = 32;
  c.encoder.proj_dim = 8;
  c.train.epochs = 2;
  c.train.seed = 5;
  return c;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::SchemaError;
}

struct Parts {
  std::uint32_t version = 0;
  json manifest;
  std::string blob;
};

Parts split(const std::string& bytes) {
  Parts p;
  std::memcpy(&p.version, bytes.data() + 4, 4);
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  p.manifest = json::parse(bytes.substr(16, len));
  p.blob = bytes.substr(16 + len);
  return p;
}

std::string join(const Parts& p) {
  const std::string m = p.manifest.dump();
  const std::uint64_t len = m.size();
  std::string out = "MVPT";
  out.append(reinterpret_cast<const char*>(&p.version), 4);
  out.append(reinterpret_cast<const char*>(&len), 8);
  return out + m + p.blob;
}

}  // namespace

TEST_CASE("metrics: worked examples") {
  const auto m = Metrics::from_counts(2, 1, 0, 1);
  CHECK(m.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.f1 == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK(m.accuracy == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<int> labels{1, 0, 1, 0}, none{0, 0, 0, 0};
  const auto neg = compute_metrics(none, labels);
  CHECK(neg.accuracy == 0.5);
  CHECK(neg.f1 == 0.0);
  CHECK(neg.precision == 0.0);
  const auto perfect = compute_metrics(labels, labels);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1 == 1.0);

  CHECK(predict(0.3, 0.3) == 0);
  CHECK(predict(0.3, 0.30001) == 1);
  CHECK(predict(1.0, -1.0) == 0);
}

TEST_CASE("metrics: agree with a direct pass over predictions") {
  nx::Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<int> pred(n), gold(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.below(2));
      gold[i] = static_cast<int>(rng.below(2));
    }
    double correct = 0, pp = 0, ap = 0, both = 0;
    for (std::size_t i = 0; i < n; ++i) {
      correct += pred[i] == gold[i];
      pp += pred[i];
      ap += gold[i];
      both += pred[i] & gold[i];
    }
    const double p = pp > 0 ? both / pp : 0.0;
    const double r = ap > 0 ? both / ap : 0.0;
    const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    const auto m = compute_metrics(pred, gold);
    CHECK(m.accuracy == doctest::Approx(correct / double(n)).epsilon(1e-15));
    CHECK(m.precision == doctest::Approx(p).epsilon(1e-15));
    CHECK(m.recall == doctest::Approx(r).epsilon(1e-15));
    CHECK(m.f1 == doctest::Approx(f1).epsilon(1e-15));
    CHECK(m.tp + m.fp + m.tn + m.fn == n);
    for (double v : {m.accuracy, m.precision, m.recall, m.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("one small step lowers the sample's cross-entropy") {
  const auto recs = testing::synthetic_views(4);
  const auto vocab = corpus::Vocab::build(recs);
  auto cfg = small_config();
  cfg.encoder.vocab_size = vocab.size();
  cfg.loss.lambda = 0.0;
  cfg.train.lr = 1e-5;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    encoder::Model model(cfg.encoder, 40 + k);
    for (auto& [name, p] : model.params()) p.set_requires_grad(true);
    const std::vector<corpus::TokenizedFunction> fns{corpus::encode(recs[k], vocab)};
    const std::vector<std::size_t> idx{0};
    const auto batch = corpus::make_batch(fns, idx, mask_options(cfg.encoder));
    auto ce = [&] {
      nx::NoGradScope off;
      return objective::cross_entropy(model.forward(batch), batch.labels).item();
    };
    const double before = ce();
    nx::Tape tape;
    objective::LossTerms terms;
    {
      nx::TapeScope scope(tape);
      const auto vr = model.multi_view_forward(model.backbone(batch), batch);
      terms = objective::compute_loss(vr, model.classify(vr), batch.labels, model, cfg.loss);
    }
    CHECK(terms.breakdown.total == terms.breakdown.l_cls);
    tape.backward(terms.total);
    Adam adam(cfg.train);
    adam.step(model.params());
    CHECK(ce() < before);
  }
}

TEST_CASE("train: deterministic and checkpoint round-trip") {
  const auto data = testing::synthetic_views(12);
  const auto valid = testing::synthetic_views(6, 99);
  const auto cfg = small_config();
  const auto a = train(cfg, data, valid);
  const auto b = train(cfg, data, valid);
  REQUIRE(a.epochs.size() == 2);
  CHECK(a.epochs[0].total == b.epochs[0].total);
  CHECK(a.epochs[0].l_cls == b.epochs[0].l_cls);
  CHECK(serialize(a.best) == serialize(b.best));
  CHECK(a.best.config.encoder.vocab_size == a.best.vocab.size());

  const std::string bytes = serialize(a.best);
  const Checkpoint back = deserialize(bytes);
  CHECK(serialize(back) == bytes);
  CHECK(back.config == a.best.config);
  CHECK(back.vocab == a.best.vocab);
  CHECK(back.rng_state == a.best.rng_state);
  for (const auto& [name, t] : a.best.params) {
    const auto& u = back.params.at(name);
    REQUIRE(u.shape() == t.shape());
    CHECK(std::memcmp(u.data().data(), t.data().data(), t.size() * sizeof(double)) == 0);
  }

  const fs::path path = fs::temp_directory_path() / ("mvptm_ckpt_" + std::to_string(::getpid()) + ".bin");
  save(a.best, path);
  const Checkpoint loaded = load(path);
  fs::remove(path);
  CHECK(evaluate(loaded, valid) == evaluate(a.best, valid));
  CHECK(code_of([&] { load(path); }) == ErrorCode::FileNotFound);

  const auto j = to_json(a.epochs[0]);
  for (const char* k : {"epoch", "l_cls", "psi_ast", "psi_cfg", "psi_dfg", "total", "val_acc", "val_f1"})
    CHECK(j.contains(k));
}

TEST_CASE("checkpoint: corrupt inputs are rejected") {
  const auto cfg = small_config();
  auto one = cfg;
  one.train.epochs = 1;
  const auto bytes = serialize(train(one, testing::synthetic_views(4), {}).best);

  for (std::size_t cut : {0ul, 3ul, 10ul, 40ul, bytes.size() / 2, bytes.size() - 1})
    CHECK(code_of([&] { deserialize(std::string_view(bytes).substr(0, cut)); }) == ErrorCode::CorruptCheckpoint);
  CHECK(code_of([&] { deserialize(bytes + "x"); }) == ErrorCode::CorruptCheckpoint);

  std::string magic = bytes;
  magic[0] = 'X';
  CHECK(code_of([&] { deserialize(magic); }) == ErrorCode::CorruptCheckpoint);

  auto parts = split(bytes);
  CHECK(parts.version == kCheckpointVersion);
  parts.version = kCheckpointVersion + 1;
  CHECK(code_of([&] { deserialize(join(parts)); }) == ErrorCode::VersionMismatch);

  parts = split(bytes);
  CHECK(join(parts) == bytes);
  parts.manifest["params"][0]["shape"][0] = parts.manifest["params"][0]["shape"][0].get<std::size_t>() + 1;
  CHECK(code_of([&] { deserialize(join(parts)); }) == ErrorCode::CorruptCheckpoint);

  parts = split(bytes);
  parts.blob.resize(parts.blob.size() - 8);
  CHECK(code_of([&] { deserialize(join(parts)); }) == ErrorCode::CorruptCheckpoint);

  parts = split(bytes);
  parts.manifest["params"].erase(0);
  CHECK(code_of([&] { deserialize(join(parts)); }) == ErrorCode::CorruptCheckpoint);
}

TEST_CASE("config: json round-trip and unknown keys") {
  auto c = small_config();
  c.loss.pairing = objective::Pairing::Structural;
  c.train.enabled_views = {true, false, true};
  c.encoder.mask_mode = views::MaskMode::Bias01;
  CHECK(config_from_json(to_json(c)) == c);
  CHECK(config_from_json(json::object()) == RunConfig{});
  CHECK(config_from_json(json{{"lr", 0.5}}).train.lr == 0.5);

  try {
    config_from_json(json{{"learning_rate", 0.1}});
    FAIL("accepted an unknown key");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
    CHECK(std::string(e.what()).find("batch_size") != std::string::npos);
  }
  CHECK(code_of([] { config_from_json(json{{"tau", "hot"}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { config_from_json(json{{"tau", -1.0}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { config_from_json(json{{"enabled_views", {"seq"}}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { config_from_json(json{{"batch_size", 0}}); }) == ErrorCode::ConfigError);
}

TEST_CASE("ablations run and keep their contracts") {
  const auto data = testing::synthetic_views(8);
  auto cfg = small_config();
  cfg.train.epochs = 1;
  for (std::size_t drop = 0; drop < 3; ++drop) {
    auto c = cfg;
    c.train.enabled_views[drop] = false;
    const auto r = train(c, data, data);
    CHECK(std::isfinite(r.epochs[0].total));
    const double psi[3] = {r.epochs[0].psi_ast, r.epochs[0].psi_cfg, r.epochs[0].psi_dfg};
    CHECK(psi[drop] == 0.0);
    CHECK(psi[(drop + 1) % 3] > 0.0);
  }
  auto off = cfg;
  off.loss.contrastive = false;
  off.train.epochs = 2;
  for (const auto& s : train(off, data, data).steps) {
    CHECK(s.loss.total == s.loss.l_cls);
    CHECK(s.loss.l_contra == 0.0);
  }
}

TEST_CASE("sequence-only classifier learns a toy set") {
  const auto data = testing::synthetic_views(16);
  auto cfg = small_config();
  cfg.loss.lambda = 0.0;
  cfg.train.enabled_views = {false, false, false};
  cfg.train.epochs = 15;
  const auto r = train(cfg, data, data);
  CHECK(r.epochs.back().l_cls < r.epochs.front().l_cls);
  for (const auto& s : r.steps) CHECK(s.loss.total == s.loss.l_cls);
}

TEST_CASE("train: best checkpoint and callbacks") {
  const auto data = testing::synthetic_views(8);
  auto cfg = small_config();
  cfg.train.epochs = 5;
  std::size_t seen = 0;
  const auto r = train(cfg, data, data, [&](const EpochLog&) { return ++seen < 3; });
  CHECK(seen == 3);
  CHECK(r.epochs.size() == 3);
  double best = -1.0;
  for (const auto& e : r.epochs) best = std::max(best, e.valid.f1);
  CHECK(r.epochs[r.best_epoch - 1].valid.f1 == best);
  CHECK(evaluate(r.best, data).f1 == best);
}

TEST_CASE("train: batches of one skip the contrastive term") {
  const auto data = testing::synthetic_views(3);
  auto cfg = small_config();
  cfg.train.epochs = 1;
  cfg.train.batch_size = 2;
  const auto r = train(cfg, data, {});
  CHECK(r.epochs[0].skipped_contrastive == 1);
  CHECK(to_json(r.epochs[0])["skipped_contrastive"] == 1);
}

TEST_CASE("train: errors") {
  const auto cfg = small_config();
  CHECK(code_of([&] { train(cfg, {}, {}); }) == ErrorCode::EmptyDataset);
  auto pre = cfg;
  pre.encoder.backbone_mode = encoder::BackboneMode::Precomputed;
  pre.encoder.precomputed_dim = 2;
  auto bad = testing::synthetic_views(4);
  for (auto& r : bad) r.embeddings = corpus::Embeddings(r.tokens.size(), {0.5, -0.5});
  CHECK(train(pre, bad, {}).epochs.size() == 2);
  (*bad[2].embeddings)[3][1] = std::numeric_limits<double>::quiet_NaN();
  CHECK(code_of([&] { train(pre, bad, {}); }) == ErrorCode::DivergedLoss);
  const auto ckpt = train(cfg, testing::synthetic_views(4), {}).best;
  CHECK(code_of([&] { evaluate(ckpt, {}); }) == ErrorCode::EmptyDataset);
}
