#pragma once

// Dataset ingestion: Devign-style JSONL loading, length filtering, view
// extraction, vocabulary and padded batches.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvptm/numerics.hpp"
#include "mvptm/views.hpp"

namespace mvptm::corpus {

inline constexpr std::size_t kMaxTokens = 512;

using Embeddings = std::vector<std::vector<double>>;

/// One labelled function. label 1 = vulnerable.
struct Record {
  std::string source;
  int label = 0;
  std::optional<Embeddings> embeddings;
};

struct LoadReport {
  std::vector<Record> records;
  std::size_t skipped_lines = 0;
  std::vector<std::size_t> bad_lines;  // 1-based line numbers
};

/// Reads {"func": ..., "target": 0|1, "embeddings"?: [[...]]} lines.
/// Throws Error(FileNotFound) or Error(EmptyDataset).
LoadReport load_jsonl(const std::filesystem::path& path);

struct ViewLoadReport {
  std::vector<views::ViewRecord> records;
  std::size_t skipped_lines = 0;
  std::vector<std::size_t> bad_lines;
};

/// Reads extraction output written by serialize_views.
ViewLoadReport load_view_jsonl(const std::filesystem::path& path);
void write_view_jsonl(const std::filesystem::path& path, std::span<const views::ViewRecord> records);

struct FilterResult {
  std::vector<Record> kept;
  std::size_t dropped_long = 0;
  std::size_t dropped_unlexable = 0;
};

/// Keeps a record iff its lexer token count is at most `max_tokens`.
FilterResult filter_length(const std::vector<Record>& records, std::size_t max_tokens = kMaxTokens);

struct ExtractReport {
  std::vector<views::ViewRecord> records;  // in input order
  std::size_t dropped_long = 0;
  std::size_t dropped_unparseable = 0;
  std::vector<std::string> errors;  // one message per unparseable record
};

/// Length filter + view extraction. Runs on `threads` workers; output order
/// follows input order regardless.
ExtractReport extract_views(const std::vector<Record>& records, std::size_t max_tokens = kMaxTokens,
                            bool symmetrize = false, unsigned threads = 1);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();
  /// Tokens seen at least `min_freq` times get ids 2.. in lexicographic order.
  static Vocab build(std::span<const views::ViewRecord> records, std::size_t min_freq = 1);
  /// Rebuilds from an id-ordered token list (including the reserved entries).
  static Vocab from_tokens(std::vector<std::string> tokens);

  int id(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Model-ready form of one function.
struct TokenizedFunction {
  std::vector<int> ids;
  int label = 0;
  std::array<std::vector<views::Edge>, 3> views;
  std::optional<Embeddings> embeddings;

  std::size_t n() const { return ids.size(); }
};

TokenizedFunction encode(const views::ViewRecord& record, const Vocab& vocab);

struct MaskOptions {
  views::MaskMode mode = views::MaskMode::NegInf;
  bool symmetrize = false;
};

/// Padded mini-batch. Real-token entries of each view bias come from the
/// view mask; entries touching padding are -kNeg except the pad diagonal.
struct Batch {
  std::size_t size = 0;
  std::size_t n = 0;
  std::vector<int> token_ids;  // [size * n], PAD = 0
  std::vector<bool> keep;      // false on padding
  std::vector<int> labels;
  std::vector<std::size_t> indices;  // positions in the source list
  numerics::Tensor pad_bias;         // [size, n, n]: padding only
  std::array<numerics::Tensor, 3> view_bias;
  numerics::Tensor embeddings;  // [size, n, dim] when every sample carries vectors
};

Batch make_batch(std::span<const TokenizedFunction> functions, std::span<const std::size_t> indices,
                 const MaskOptions& masks);

/// Seeded shuffle (Fisher-Yates on MT19937-64), then fixed-size chunks.
std::vector<Batch> make_batches(std::span<const TokenizedFunction> functions, std::size_t batch_size,
                                std::uint64_t seed, const MaskOptions& masks, bool shuffle = true);

}  // namespace mvptm::corpus
