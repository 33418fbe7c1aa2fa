#include "mvptm/engine.hpp"

namespace mvptm::engine {

namespace nx = numerics;
using nx::Tensor;

namespace {

constexpr double kOpTolerance = 1e-6;
constexpr double kModelTolerance = 1e-4;

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(seed) {}

  Tensor random(nx::Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> data(nx::element_count(shape));
    for (double& x : data) x = rng_.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(data));
  }

  // sum(t * w) for a fixed random w, so every output coordinate matters.
  Tensor reduce(const Tensor& t) {
    auto it = weights_.find(t.shape());
    if (it == weights_.end()) it = weights_.emplace(t.shape(), random(t.shape())).first;
    return nx::sum(nx::mul(t, it->second));
  }

  void check(const std::string& name, std::vector<Tensor> params, const std::function<Tensor()>& f,
             double tolerance = kOpTolerance) {
    const auto report = nx::grad_check(f, params);
    cases_.push_back({name, report.max_rel_error, tolerance, report.coordinates});
  }

  std::vector<GradCheckCase> take() { return std::move(cases_); }

 private:
  nx::Rng rng_;
  std::map<nx::Shape, Tensor> weights_;
  std::vector<GradCheckCase> cases_;
};

void op_cases(Suite& s) {
  Tensor a = s.random({3, 4});
  Tensor b = s.random({3, 4});
  s.check("add", {a, b}, [&] { return s.reduce(nx::add(a, b)); });
  s.check("sub", {a, b}, [&] { return s.reduce(nx::sub(a, b)); });
  s.check("mul", {a, b}, [&] { return s.reduce(nx::mul(a, b)); });
  s.check("scale", {a}, [&] { return s.reduce(nx::scale(a, -2.5)); });
  s.check("sum", {a}, [&] { return nx::scale(nx::sum(nx::mul(a, a)), 0.5); });

  Tensor row = s.random({4});
  s.check("add_row", {a, row}, [&] { return s.reduce(nx::add_row(a, row)); });

  Tensor m = s.random({4, 5});
  s.check("matmul", {a, m}, [&] { return s.reduce(nx::matmul(a, m)); });
  Tensor x3 = s.random({2, 3, 4});
  s.check("matmul_shared_rhs", {x3, m}, [&] { return s.reduce(nx::matmul(x3, m)); });
  Tensor y3 = s.random({2, 4, 3});
  s.check("matmul_batched", {x3, y3}, [&] { return s.reduce(nx::matmul(x3, y3)); });
  s.check("matmul_self_transpose", {x3}, [&] { return s.reduce(nx::matmul(x3, nx::transpose_last(x3))); });
  s.check("transpose_last", {x3}, [&] { return s.reduce(nx::transpose_last(x3)); });

  Tensor bias5 = s.random({5});
  s.check("linear", {a, m, bias5}, [&] { return s.reduce(nx::linear(a, m, bias5)); });

  Tensor logits = s.random({2, 3, 3}, -2.0, 2.0);
  Tensor mask = Tensor::zeros({3, 3});
  mask[1] = -views::kNeg;
  mask[5] = -views::kNeg;
  mask[6] = -views::kNeg;
  s.check("softmax_bias", {logits}, [&] { return s.reduce(nx::softmax_bias(logits, mask)); });

  Tensor c = s.random({3, 2});
  s.check("concat_last", {a, c}, [&] {
    const std::array<Tensor, 2> parts{a, c};
    return s.reduce(nx::concat_last(parts));
  });
  s.check("slice_last", {x3}, [&] { return s.reduce(nx::slice_last(x3, 1, 2)); });
  Tensor d = s.random({2, 4});
  s.check("concat_rows", {a, d}, [&] { return s.reduce(nx::concat_rows(a, d)); });

  Tensor gamma = s.random({4}, 0.5, 1.5);
  Tensor beta = s.random({4});
  s.check("layer_norm", {x3, gamma, beta}, [&] { return s.reduce(nx::layer_norm(x3, gamma, beta)); });
  Tensor wide = s.random({3, 4}, -3.0, 3.0);
  s.check("gelu", {wide}, [&] { return s.reduce(nx::gelu(wide)); });

  const std::vector<bool> keep{true, true, false, true, false, false};
  s.check("mean_pool", {x3}, [&] { return s.reduce(nx::mean_pool(x3, keep)); });

  Tensor table = s.random({5, 3});
  const std::vector<int> ids{4, 0, 4, 2};
  s.check("embedding", {table}, [&] { return s.reduce(nx::embedding(table, ids, {2, 2})); });
  s.check("l2_normalize_rows", {a}, [&] { return s.reduce(nx::l2_normalize_rows(a)); });

  Tensor cls = s.random({4, 3}, -2.0, 2.0);
  Tensor cls_bias = Tensor::zeros({4, 3});
  cls_bias[0] = -views::kNeg;
  const std::vector<int> targets{2, 0, 1, 1};
  s.check("softmax_cross_entropy", {cls}, [&] { return nx::softmax_cross_entropy(cls, targets, cls_bias); });

  Tensor q = s.random({2, 3, 4});
  Tensor k = s.random({2, 3, 4});
  Tensor v = s.random({2, 3, 4});
  s.check("multi_head_attention", {q, k, v},
          [&] { return s.reduce(encoder::multi_head_attention(q, k, v, mask, 2, 2)); });

  Tensor anchors = s.random({3, 4});
  Tensor positives = s.random({3, 4});
  s.check("nt_xent", {anchors, positives}, [&] { return objective::nt_xent(anchors, positives, 0.5); });
}

void model_case(Suite& s, std::uint64_t seed) {
  const std::vector<std::string> sources = {
      "int f(int a){a++;return a;}",
      "void h(int x){if(x)x=1;}",
  };
  std::vector<views::ViewRecord> records;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    records.push_back(views::extract(sources[i], static_cast<int>(i % 2)));
  }
  const auto vocab = corpus::Vocab::build(records);

  encoder::EncoderConfig ec;
  ec.vocab_size = vocab.size();
  ec.d_model = 16;
  ec.backbone_layers = 1;
  ec.backbone_heads = 2;
  ec.shared_heads = 2;
  ec.specific_heads = 2;
  ec.mlp_hidden = 16;
  ec.ffn_hidden = 32;
  ec.max_len = 16;
  ec.proj_dim = 8;
  const encoder::Model model(ec, seed);

  std::vector<corpus::TokenizedFunction> fns;
  for (const auto& r : records) fns.push_back(corpus::encode(r, vocab));
  const std::vector<std::size_t> order{0, 1};
  const corpus::Batch batch = corpus::make_batch(fns, order, mask_options(ec));

  objective::LossConfig lc;
  std::vector<Tensor> params;
  for (const auto& [name, p] : model.params()) params.push_back(p);
  s.check(
      "total_loss(B=2,d_model=16)", params,
      [&] {
        const Tensor z = model.backbone(batch);
        const auto vr = model.multi_view_forward(z, batch);
        return objective::compute_loss(vr, model.classify(vr), batch.labels, model, lc).total;
      },
      kModelTolerance);
}

}  // namespace

std::vector<GradCheckCase> gradcheck_suite(bool full, std::uint64_t seed) {
  Suite s(seed);
  op_cases(s);
  if (full) model_case(s, seed);
  return s.take();
}

}  // namespace mvptm::engine
