#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <thread>

#include "json.hpp"
#include "mvptm/corpus.hpp"
#include "mvptm/error.hpp"

namespace mvptm::corpus {

using nlohmann::json;
using numerics::Tensor;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in || std::filesystem::is_directory(path)) {
    throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  }
  return in;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::optional<Record> parse_record(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto func = j.find("func");
  auto target = j.find("target");
  if (func == j.end() || !func->is_string() || target == j.end()) return std::nullopt;
  Record r;
  r.source = func->get<std::string>();
  if (r.source.empty()) return std::nullopt;
  if (target->is_boolean()) {
    r.label = target->get<bool>() ? 1 : 0;
  } else if (target->is_number_integer()) {
    r.label = target->get<int>();
  } else {
    return std::nullopt;
  }
  if (r.label != 0 && r.label != 1) return std::nullopt;
  if (auto e = j.find("embeddings"); e != j.end()) {
    try {
      r.embeddings = e->get<Embeddings>();
    } catch (const json::exception&) {
      return std::nullopt;
    }
  }
  return r;
}

}  // namespace

LoadReport load_jsonl(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  LoadReport report;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    if (auto r = parse_record(line)) {
      report.records.push_back(std::move(*r));
    } else {
      ++report.skipped_lines;
      report.bad_lines.push_back(number);
    }
  }
  if (report.records.empty()) throw Error(ErrorCode::EmptyDataset, "no usable records in " + path.string());
  return report;
}

ViewLoadReport load_view_jsonl(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  ViewLoadReport report;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    try {
      report.records.push_back(views::parse_views(line));
    } catch (const Error&) {
      ++report.skipped_lines;
      report.bad_lines.push_back(number);
    }
  }
  if (report.records.empty()) throw Error(ErrorCode::EmptyDataset, "no usable records in " + path.string());
  return report;
}

void write_view_jsonl(const std::filesystem::path& path, std::span<const views::ViewRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + path.string());
  for (const auto& r : records) out << views::serialize_views(r) << '\n';
}

FilterResult filter_length(const std::vector<Record>& records, std::size_t max_tokens) {
  FilterResult out;
  for (const auto& r : records) {
    std::size_t n = 0;
    try {
      n = cfront::lex(r.source).size();
    } catch (const Error&) {
      ++out.dropped_unlexable;
      continue;
    }
    if (n > max_tokens) {
      ++out.dropped_long;
    } else {
      out.kept.push_back(r);
    }
  }
  return out;
}

ExtractReport extract_views(const std::vector<Record>& records, std::size_t max_tokens, bool symmetrize,
                            unsigned threads) {
  enum class Status { Ok, Long, Bad };
  struct Slot {
    Status status = Status::Ok;
    views::ViewRecord record;
    std::string error;
  };
  std::vector<Slot> slots(records.size());

  auto work = [&](std::size_t i) {
    Slot& s = slots[i];
    const Record& r = records[i];
    try {
      if (cfront::lex(r.source).size() > max_tokens) {
        s.status = Status::Long;
        return;
      }
      s.record = views::extract(r.source, r.label, symmetrize);
      if (r.embeddings) {
        if (r.embeddings->size() != s.record.tokens.size()) {
          throw Error(ErrorCode::SchemaError, "embeddings row count differs from token count");
        }
        s.record.embeddings = r.embeddings;
      }
    } catch (const Error& e) {
      s.status = Status::Bad;
      s.error = "record " + std::to_string(i) + ": " + e.what();
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(records.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < records.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < records.size(); i = next++) work(i);
      });
    }
  }

  ExtractReport report;
  for (auto& s : slots) {
    switch (s.status) {
      case Status::Ok:
        report.records.push_back(std::move(s.record));
        break;
      case Status::Long:
        ++report.dropped_long;
        break;
      case Status::Bad:
        ++report.dropped_unparseable;
        report.errors.push_back(std::move(s.error));
        break;
    }
  }
  return report;
}

Vocab::Vocab() : tokens_{"<pad>", "<unk>"} {
  ids_.emplace(tokens_[0], kPad);
  ids_.emplace(tokens_[1], kUnk);
}

Vocab Vocab::build(std::span<const views::ViewRecord> records, std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    for (const auto& t : r.tokens) ++counts[t];
  }
  std::vector<std::string> tokens{"<pad>", "<unk>"};
  for (const auto& [text, count] : counts) {
    if (count >= std::max<std::size_t>(min_freq, 1) && text != "<pad>" && text != "<unk>") tokens.push_back(text);
  }
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2) throw Error(ErrorCode::SchemaError, "vocabulary lacks reserved entries");
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.ids_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::SchemaError, "duplicate vocabulary entry \"" + v.tokens_[i] + "\"");
    }
  }
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end() || it->second < 2) return kUnk;
  return it->second;
}

TokenizedFunction encode(const views::ViewRecord& record, const Vocab& vocab) {
  TokenizedFunction f;
  f.ids.reserve(record.tokens.size());
  for (const auto& t : record.tokens) f.ids.push_back(vocab.id(t));
  f.label = record.label;
  f.views = record.views;
  f.embeddings = record.embeddings;
  return f;
}

Batch make_batch(std::span<const TokenizedFunction> functions, std::span<const std::size_t> indices,
                 const MaskOptions& masks) {
  Batch b;
  b.size = indices.size();
  for (std::size_t i : indices) b.n = std::max(b.n, functions[i].n());
  if (b.size == 0 || b.n == 0) throw Error(ErrorCode::EmptyDataset, "empty batch");
  const std::size_t n = b.n;
  b.indices.assign(indices.begin(), indices.end());
  b.token_ids.assign(b.size * n, Vocab::kPad);
  b.keep.assign(b.size * n, false);

  std::vector<double> pad(b.size * n * n, -views::kNeg);
  std::array<std::vector<double>, 3> view(
      {std::vector<double>(pad.size()), std::vector<double>(pad.size()), std::vector<double>(pad.size())});

  bool all_embedded = true;
  std::size_t emb_dim = 0;
  for (std::size_t s = 0; s < b.size; ++s) {
    const auto& f = functions[indices[s]];
    if (!f.embeddings || f.embeddings->empty() || f.embeddings->size() != f.n()) {
      all_embedded = false;
    } else if (emb_dim == 0) {
      emb_dim = f.embeddings->front().size();
    }
  }

  for (std::size_t s = 0; s < b.size; ++s) {
    const auto& f = functions[indices[s]];
    const std::size_t len = f.n();
    b.labels.push_back(f.label);
    double* ps = pad.data() + s * n * n;
    for (std::size_t i = 0; i < len; ++i) {
      b.token_ids[s * n + i] = f.ids[i];
      b.keep[s * n + i] = true;
      for (std::size_t j = 0; j < len; ++j) ps[i * n + j] = 0.0;
    }
    for (std::size_t i = len; i < n; ++i) ps[i * n + i] = 0.0;

    for (auto kind : views::kStructuralViews) {
      const std::size_t k = views::slot(kind);
      double* vs = view[k].data() + s * n * n;
      std::copy(ps, ps + n * n, vs);
      const auto g = views::ViewGraph::from_edges(kind, static_cast<int>(len), f.views[k]);
      const auto m = views::to_mask(g, masks.mode, masks.symmetrize);
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t j = 0; j < len; ++j) vs[i * n + j] = m.bias[i * len + j];
      }
    }
  }

  b.pad_bias = Tensor({b.size, n, n}, std::move(pad));
  for (std::size_t k = 0; k < 3; ++k) b.view_bias[k] = Tensor({b.size, n, n}, std::move(view[k]));

  if (all_embedded && emb_dim > 0) {
    std::vector<double> e(b.size * n * emb_dim, 0.0);
    for (std::size_t s = 0; s < b.size; ++s) {
      const auto& rows = *functions[indices[s]].embeddings;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != emb_dim) {
          throw Error(ErrorCode::MissingEmbeddings, "ragged embedding rows");
        }
        std::copy(rows[i].begin(), rows[i].end(), e.begin() + static_cast<std::ptrdiff_t>((s * n + i) * emb_dim));
      }
    }
    b.embeddings = Tensor({b.size, n, emb_dim}, std::move(e));
  }
  return b;
}

std::vector<Batch> make_batches(std::span<const TokenizedFunction> functions, std::size_t batch_size,
                                std::uint64_t seed, const MaskOptions& masks, bool shuffle) {
  if (batch_size == 0) throw Error(ErrorCode::ConfigError, "batch_size must be positive");
  std::vector<std::size_t> order(functions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle && order.size() > 1) {
    numerics::Rng rng(seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    batches.push_back(make_batch(functions, std::span(order).subspan(start, len), masks));
  }
  return batches;
}

}  // namespace mvptm::corpus
