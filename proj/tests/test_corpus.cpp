#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "doctest.h"
#include "mvptm/corpus.hpp"
#include "mvptm/encoder.hpp"
#include "mvptm/error.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace mvptm;
using namespace mvptm::corpus;
namespace fs = std::filesystem;
namespace nx = mvptm::numerics;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& contents, const std::string& stem = "corpus") {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("mvptm_" + stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".jsonl");
    std::ofstream(path, std::ios::binary) << contents;
  }
  ~TempFile() { fs::remove(path); }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::SchemaError;
}

views::ViewRecord tokens_only(std::vector<std::string> toks, int label = 0) {
  views::ViewRecord r;
  r.tokens = std::move(toks);
  r.label = label;
  return r;
}

std::vector<TokenizedFunction> encode_all(const std::vector<views::ViewRecord>& recs, const Vocab& vocab) {
  std::vector<TokenizedFunction> out;
  for (const auto& r : recs) out.push_back(encode(r, vocab));
  return out;
}

}  // namespace

TEST_CASE("load_jsonl: records, labels and skipped lines") {
  TempFile one(R"({"func":"int f(){return 0;}","target":0})"
               "\n");
  const auto r = load_jsonl(one.path);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].label == 0);
  CHECK(r.records[0].source == "int f(){return 0;}");
  CHECK(r.skipped_lines == 0);

  TempFile mixed("{\"func\":\"void a(){}\",\"target\":1}\n"
                 "not json\n"
                 "\n"
                 "{\"func\":\"void b(){}\"}\n"
                 "{\"func\":\"void c(){}\",\"target\":true,\"embeddings\":[[1,2]]}\n");
  const auto m = load_jsonl(mixed.path);
  REQUIRE(m.records.size() == 2);
  CHECK(m.records[0].label == 1);
  CHECK(m.records[1].label == 1);
  REQUIRE(m.records[1].embeddings.has_value());
  CHECK(m.records[1].embeddings->at(0) == std::vector<double>{1, 2});
  CHECK(m.skipped_lines == 2);
  CHECK(m.bad_lines == std::vector<std::size_t>{2, 4});
}

TEST_CASE("load_jsonl: missing and empty files") {
  TempFile empty("");
  CHECK(code_of([&] { load_jsonl(empty.path); }) == ErrorCode::EmptyDataset);
  TempFile junk("junk\n{}\n");
  CHECK(code_of([&] { load_jsonl(junk.path); }) == ErrorCode::EmptyDataset);
  CHECK(code_of([] { load_jsonl("/nonexistent/mvptm/none.jsonl"); }) == ErrorCode::FileNotFound);
}

TEST_CASE("filter_length: boundaries and counts") {
  const auto at = [](std::size_t n) { return Record{testing::function_with_tokens(n), 0, std::nullopt}; };
  CHECK(cfront::lex(at(512).source).size() == 512);
  CHECK(cfront::lex(at(513).source).size() == 513);
  CHECK(filter_length({at(512)}).kept.size() == 1);
  CHECK(filter_length({at(513)}).dropped_long == 1);

  std::vector<Record> mixed;
  for (std::size_t i = 0; i < 10; ++i) mixed.push_back(at(11 + 3 * i));
  for (std::size_t n : {513u, 600u, 2000u}) mixed.insert(mixed.begin() + 4, at(n));
  const auto r = filter_length(mixed);
  CHECK(r.kept.size() == 10);
  CHECK(r.dropped_long == 3);

  const auto again = filter_length(r.kept);
  CHECK(again.kept.size() == r.kept.size());
  CHECK(again.dropped_long == 0);
  for (std::size_t i = 0; i < r.kept.size(); ++i) CHECK(again.kept[i].source == r.kept[i].source);

  const auto bad = filter_length({Record{"x = \"open", 0, std::nullopt}});
  CHECK(bad.kept.empty());
  CHECK(bad.dropped_unlexable == 1);
}

TEST_CASE("extract_views: order is kept across threads") {
  auto records = testing::synthetic_records(24);
  records.insert(records.begin() + 5, Record{"int x = 3;", 0, std::nullopt});
  records.push_back(Record{testing::function_with_tokens(600), 1, std::nullopt});
  const auto one = extract_views(records, kMaxTokens, false, 1);
  const auto many = extract_views(records, kMaxTokens, false, 4);
  CHECK(one.records.size() == 24);
  CHECK(one.dropped_unparseable == 1);
  CHECK(one.dropped_long == 1);
  CHECK(one.errors.size() == 1);
  CHECK(one.records == many.records);
  for (std::size_t i = 0, r = 0; i < records.size(); ++i) {
    if (i == 5 || i + 1 == records.size()) continue;
    CHECK(one.records[r++] == views::extract(records[i].source, records[i].label));
  }
}

TEST_CASE("view jsonl round-trip") {
  const auto recs = testing::synthetic_views(6);
  TempFile out("", "views");
  write_view_jsonl(out.path, recs);
  const auto back = load_view_jsonl(out.path);
  CHECK(back.records == recs);
  CHECK(back.skipped_lines == 0);
}

TEST_CASE("vocab: reserved ids, unknowns and determinism") {
  const std::vector<views::ViewRecord> recs{tokens_only({"a", "b"}), tokens_only({"a"})};
  const auto v = Vocab::build(recs);
  CHECK(v.size() == 4);
  CHECK(v.tokens()[Vocab::kPad] == "<pad>");
  CHECK(v.tokens()[Vocab::kUnk] == "<unk>");
  // source text spelled like a reserved entry never encodes to PAD
  CHECK(v.id("<pad>") == Vocab::kUnk);
  CHECK(v.id("a") >= 2);
  CHECK(v.id("b") >= 2);
  CHECK(v.id("a") != v.id("b"));
  CHECK(encode(tokens_only({"c"}), v).ids == std::vector<int>{Vocab::kUnk});
  CHECK(Vocab::build(recs) == v);
  CHECK(Vocab::from_tokens(v.tokens()) == v);

  const auto rare = Vocab::build(recs, 2);
  CHECK(rare.size() == 3);
  CHECK(rare.id("b") == Vocab::kUnk);
}

TEST_CASE("make_batches: sizes, padding and seeds") {
  std::vector<views::ViewRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(views::extract("int f(int a){return a;}", i % 2));
  const auto vocab = Vocab::build(recs);
  const auto fns = encode_all(recs, vocab);
  const auto batches = make_batches(fns, 2, 7, {});
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size == 2);
  CHECK(batches[1].size == 2);
  CHECK(batches[2].size == 1);
  for (const auto& b : batches) {
    CHECK(b.n == fns[0].n());
    for (bool k : b.keep) CHECK(k);
  }

  const auto synth = testing::synthetic_views(20);
  const auto v2 = Vocab::build(synth);
  const auto f2 = encode_all(synth, v2);
  auto order = [&](std::uint64_t seed) {
    std::vector<std::size_t> idx;
    for (const auto& b : make_batches(f2, 3, seed, {})) idx.insert(idx.end(), b.indices.begin(), b.indices.end());
    return idx;
  };
  CHECK(order(5) == order(5));
  CHECK(order(5) != order(6));
  auto sorted = order(5);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
  std::vector<std::size_t> plain;
  for (const auto& b : make_batches(f2, 3, 5, {}, false)) plain.insert(plain.end(), b.indices.begin(), b.indices.end());
  CHECK(plain == sorted);
}

TEST_CASE("batch: padding is blocked everywhere except its diagonal") {
  const std::vector<views::ViewRecord> recs{views::extract("void f(){}", 0),
                                            views::extract("int f(int a,int b){ if(a>3) b=a-b; return b; }", 1)};
  const auto vocab = Vocab::build(recs);
  const auto fns = encode_all(recs, vocab);
  const std::vector<std::size_t> idx{0, 1};
  for (auto mode : {views::MaskMode::NegInf, views::MaskMode::Bias01}) {
    const auto b = make_batch(fns, idx, {mode, false});
    const std::size_t n = b.n, short_n = fns[0].n();
    CHECK(n == fns[1].n());
    for (std::size_t i = short_n; i < n; ++i) {
      CHECK(!b.keep[i]);
      CHECK(b.token_ids[i] == Vocab::kPad);
    }
    const std::array<nx::Tensor, 4> all{b.pad_bias, b.view_bias[0], b.view_bias[1], b.view_bias[2]};
    for (const auto& t : all) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const bool pad = i >= short_n || j >= short_n;
          if (pad && i != j) CHECK(t[i * n + j] == -views::kNeg);
          if (i == j) CHECK(t[i * n + j] != -views::kNeg);
        }
    }
    // real-token block is the view mask itself
    const auto mask = views::to_mask(recs[1].graph(views::ViewKind::Dfg), mode);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) CHECK(b.view_bias[2][n * n + i * n + j] == mask.at(int(i), int(j)));
  }
}

TEST_CASE("batch: pad columns carry no attention and pad rows do not reach pooling") {
  const auto recs = testing::synthetic_views(6);
  const auto vocab = Vocab::build(recs);
  const auto fns = encode_all(recs, vocab);
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5};
  const auto b = make_batch(fns, idx, {});
  nx::Rng rng(3);
  const std::size_t n = b.n;
  std::vector<double> logits(b.size * n * n);
  for (double& x : logits) x = rng.uniform(-50.0, 50.0);
  for (std::size_t v = 0; v < 3; ++v) {
    const auto p = nx::softmax_bias(nx::Tensor({b.size, n, n}, logits), b.view_bias[v]);
    for (std::size_t s = 0; s < b.size; ++s)
      for (std::size_t i = 0; i < n; ++i) {
        if (!b.keep[s * n + i]) continue;
        double mass = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          if (!b.keep[s * n + j]) mass += p[(s * n + i) * n + j];
        CHECK(mass <= 1e-12);
      }
  }

  encoder::EncoderConfig c;
  c.vocab_size = vocab.size();
  c.d_model = 16;
  c.backbone_layers = 1;
  c.backbone_heads = 2;
  c.mlp_hidden = 8;
  c.ffn_hidden = 16;
  c.proj_dim = 4;
  const encoder::Model m(c, 3);
  const nx::Tensor z = m.backbone(b);
  nx::Tensor noisy = z.clone();
  for (std::size_t r = 0; r < b.size * n; ++r)
    if (!b.keep[r])
      for (std::size_t j = 0; j < 16; ++j) noisy[r * 16 + j] = rng.uniform(-100.0, 100.0);
  const auto clean = m.multi_view_forward(z, b);
  const auto dirty = m.multi_view_forward(noisy, b);
  for (std::size_t v = 0; v < 4; ++v)
    for (std::size_t i = 0; i < clean.pooled[v].size(); ++i)
      CHECK(std::abs(clean.pooled[v][i] - dirty.pooled[v][i]) <= 1e-12);
}

TEST_CASE("encode keeps views and labels") {
  const auto rec = views::extract("int f(int a){return a;}", 1);
  const auto vocab = Vocab::build(std::vector<views::ViewRecord>{rec});
  const auto fn = encode(rec, vocab);
  CHECK(fn.label == 1);
  CHECK(fn.n() == rec.tokens.size());
  CHECK(fn.views == rec.views);
  CHECK(encode(rec, vocab).ids == fn.ids);
}
