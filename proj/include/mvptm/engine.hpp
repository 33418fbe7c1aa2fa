#pragma once

// Training loop, evaluation metrics, run configuration, checkpoints and the
// finite-difference suite.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvptm/corpus.hpp"
#include "mvptm/encoder.hpp"
#include "mvptm/objective.hpp"

namespace mvptm::engine {

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  static Metrics from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);
  bool operator==(const Metrics&) const = default;
};

/// Class 1 wins only when its logit is strictly larger.
int predict(double logit0, double logit1);
Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels);
nlohmann::json to_json(const Metrics& m);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  encoder::ViewSet enabled_views = encoder::kAllViews;
  std::size_t min_freq = 1;
  bool eval_train = false;  // also report train accuracy each epoch

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Everything a run is configured by; serialised as one flat JSON object.
struct RunConfig {
  encoder::EncoderConfig encoder;
  objective::LossConfig loss;
  TrainConfig train;

  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& config);
/// Applies the keys of `j` on top of `base`. Unknown keys raise
/// Error(ConfigError) listing all of them.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
std::vector<std::string> config_keys();

corpus::MaskOptions mask_options(const encoder::EncoderConfig& config);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  corpus::Vocab vocab;
  encoder::ModelParams params;
  std::string rng_state;
};

std::string serialize(const Checkpoint& ckpt);
/// Throws CorruptCheckpoint or VersionMismatch.
Checkpoint deserialize(std::string_view bytes);
void save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load(const std::filesystem::path& path);

encoder::Model make_model(const Checkpoint& ckpt);

struct StepLog {
  std::size_t epoch = 0;
  std::size_t step = 0;
  objective::LossBreakdown loss;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double l_cls = 0.0;
  double psi_ast = 0.0;
  double psi_cfg = 0.0;
  double psi_dfg = 0.0;
  double total = 0.0;
  Metrics valid;
  std::optional<Metrics> train;
  std::size_t skipped_contrastive = 0;  // steps whose batch was too small
};

nlohmann::json to_json(const EpochLog& log);

struct TrainResult {
  Checkpoint best;
  std::size_t best_epoch = 0;
  std::vector<EpochLog> epochs;
  std::vector<StepLog> steps;
};

/// Return false to stop after this epoch.
using EpochCallback = std::function<bool(const EpochLog&)>;

/// Throws EmptyDataset or DivergedLoss.
TrainResult train(const RunConfig& config, std::span<const views::ViewRecord> train_set,
                  std::span<const views::ViewRecord> valid_set, const EpochCallback& on_epoch = {});

/// Argmax predictions over `data` (evaluation runs without a tape).
std::vector<int> predict_all(const encoder::Model& model, const corpus::Vocab& vocab,
                             std::span<const views::ViewRecord> data, std::size_t batch_size,
                             const encoder::ViewSet& enabled);
Metrics evaluate(const encoder::Model& model, const corpus::Vocab& vocab, std::span<const views::ViewRecord> data,
                 std::size_t batch_size, const encoder::ViewSet& enabled);
Metrics evaluate(const Checkpoint& ckpt, std::span<const views::ViewRecord> data);

/// One Adam update applied to every parameter that has a gradient.
class Adam {
 public:
  explicit Adam(const TrainConfig& config) : c_(config) {}
  void step(encoder::ModelParams& params);

 private:
  TrainConfig c_;
  std::size_t t_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

struct GradCheckCase {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t coordinates = 0;
  bool passed() const { return max_rel_error <= tolerance; }
};

/// Every differentiable op at 1e-6; with `full`, also the whole objective on
/// a tiny model (B=2, n<=16, d_model=16) at 1e-4.
std::vector<GradCheckCase> gradcheck_suite(bool full, std::uint64_t seed = 7);

}  // namespace mvptm::engine
