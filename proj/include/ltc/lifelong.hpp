#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ltc/data.hpp"
#include "ltc/train.hpp"

namespace ltc::lifelong {

struct PoolConfig {
  std::size_t capacity = 5;
  /// Largest confidence gap that still counts as a known task.
  double delta = 0.05;
  /// Gaps up to this value are refined in place; (refine_band, delta] retrains.
  double refine_band = 0.02;
  Index replay_cap = 256;

  void validate() const;
};

struct PoolEntry {
  int id = 0;
  train::TrainedModel model;
  /// Number of routing decisions that selected this entry.
  int habituation = 0;
  /// Stored samples replayed alongside new data when refining.
  TimeSeriesDataset replay;
  int created_at = 0;
};

struct ModelPool {
  PoolConfig config;
  /// Evicted entries are written to `storage_dir / "evicted" / <id>`.
  std::filesystem::path storage_dir;
  std::vector<PoolEntry> entries;
  std::vector<int> evicted;  // ids, in eviction order
  int next_id = 0;
  int tasks_seen = 0;

  PoolEntry* find(int id);
  const PoolEntry* find(int id) const;
};

enum class DecisionKind { Refine, Retrain, NewModel };
std::string to_string(DecisionKind kind);

struct EntryScore {
  int id = 0;
  double p_x = 0.0;
  /// |p_x - p_c|; +inf when the entry cannot score the data (shape mismatch).
  double v = 0.0;
};

struct RoutingDecision {
  DecisionKind kind = DecisionKind::NewModel;
  std::optional<int> entry_id;
  /// Best gap over the pool; unset for an empty pool.
  std::optional<double> v;
  std::vector<EntryScore> scores;
};

/// Scores every live entry on X. Throws EmptyPool when there is nothing to score.
std::vector<EntryScore> evaluate_pool(const ModelPool& pool, const TimeSeriesDataset& X);

/// Refine iff v <= refine_band; Retrain iff refine_band < v <= delta; else NewModel.
DecisionKind classify(double v, const PoolConfig& config);

/// Picks the minimum-gap entry (lowest id on ties) and classifies it. With
/// `commit`, Refine and Retrain bump the selected entry's habituation.
RoutingDecision route_scores(ModelPool& pool, std::vector<EntryScore> scores, bool commit = true);
RoutingDecision route(ModelPool& pool, const TimeSeriesDataset& X, bool commit = true);

/// Replay buffer followed by X_new.
TimeSeriesDataset replay_mixture(const PoolEntry& entry, const TimeSeriesDataset& X_new);

/// Uniform subsample of at most `cap` samples (order preserved).
TimeSeriesDataset subsample(const TimeSeriesDataset& ds, Index cap, std::uint64_t seed);

/// Phase-2-only training on replay + X_new from the entry's current
/// parameters; refreshes p_c and the replay buffer.
void refine_with_replay(PoolEntry& entry, const TimeSeriesDataset& X_new, const train::TrainConfig& cfg,
                        Index replay_cap);

/// Retrain updates the matched entry in place with both phases; NewModel
/// trains a fresh entry and inserts it through add_or_evict. Returns a copy
/// of the trained model.
train::TrainedModel train_new_or_retrain(ModelPool& pool, const RoutingDecision& decision, const TimeSeriesDataset& X,
                                         Index k, const train::TrainConfig& cfg);

/// Appends when below capacity; otherwise writes the least-habituated entry
/// (oldest on ties) to disk, drops it, and appends. Returns the evicted id.
std::optional<int> add_or_evict(ModelPool& pool, PoolEntry entry);

struct StepOptions {
  /// Non-lifelong baseline: after the first task, always refine entry 0 on the
  /// new data alone (no replay, no expansion).
  bool single_model = false;
};

struct StepResult {
  std::vector<int> labels;
  RoutingDecision decision;
};

StepResult lifelong_step(ModelPool& pool, const TimeSeriesDataset& task, Index k, const train::TrainConfig& cfg,
                         const StepOptions& options = {});

struct TaskEvaluation {
  std::vector<int> labels;
  int entry_id = -1;
  double v = 0.0;
};

/// Labels X with the best-matching entry without mutating the pool.
TaskEvaluation evaluate_task(const ModelPool& pool, const TimeSeriesDataset& X);

// Checkpoints. An entry directory holds entry.json, model/, centroids.f64 and
// replay.bin; a pool directory holds pool.json, entries/<id>/ and evicted/<id>/.
void save_entry(const std::filesystem::path& dir, const PoolEntry& entry);
PoolEntry load_entry(const std::filesystem::path& dir);
void save_pool(const ModelPool& pool, const std::filesystem::path& dir);
ModelPool load_pool(const std::filesystem::path& dir);

}  // namespace ltc::lifelong
