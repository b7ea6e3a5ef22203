#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ltc/data.hpp"
#include "ltc/lifelong.hpp"
#include "ltc/train.hpp"

namespace ltc::cli {

struct ExperimentConfig {
  std::filesystem::path data;
  /// Inferred from the extension when unset (`.bin` is Binary).
  std::optional<DataFormat> format;
  std::optional<std::filesystem::path> labels;
  /// Clusters for cluster/baseline; 0 means "number of classes in the labels".
  Index k = 0;
  /// Lifelong: clusters per task. Empty means "classes present in the task".
  std::vector<Index> task_k;
  train::TrainConfig train;
  lifelong::PoolConfig pool;
  StreamMode stream_mode = StreamMode::Sequential;
  StreamParams stream;
  bool ablate_single_model = false;
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  int repeats = 1;
  /// When false wall_seconds is written as 0 so reruns are byte-identical.
  bool timing = true;

  void validate() const;
};

/// Overlays the keys present in `json_text` onto cfg. Unknown keys are rejected.
void apply_config_json(ExperimentConfig& cfg, const std::string& json_text);

/// Reads the dataset, pads the time axis to a multiple of 4 and z-scores it.
TimeSeriesDataset prepare_dataset(const ExperimentConfig& cfg);

struct ResultRow {
  std::string dataset;
  Index n = 0, length = 0, vars = 0;
  std::optional<int> classes;
  Index k = 0;
  std::string seed;
  std::optional<double> accuracy, purity, mse_final, kld_final;
  double wall_seconds = 0.0;
  std::string algorithm;
};

/// One row per repeat followed by a `mean` row when repeats > 1.
std::vector<ResultRow> cmd_cluster(const ExperimentConfig& cfg);
std::vector<ResultRow> cmd_baseline(const ExperimentConfig& cfg);
void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

struct LifelongRow {
  int step = 0;
  int task_id = 0;
  lifelong::DecisionKind decision = lifelong::DecisionKind::NewModel;
  std::optional<double> v;
  std::size_t pool_size = 0;
  std::optional<double> acc_task;
  /// Accuracy on every distinct task of the stream; unset until first seen.
  std::vector<std::optional<double>> acc_per_task;
};

/// Runs the stream, writes lifelong.csv and the final pool under cfg.out.
std::vector<LifelongRow> cmd_lifelong(const ExperimentConfig& cfg);
void write_lifelong_csv(const std::filesystem::path& path, const std::vector<LifelongRow>& rows);

enum class PoolAction { List, Export, Inspect };
void cmd_pool(PoolAction action, const std::filesystem::path& pool_dir, std::ostream& out,
              const std::optional<std::filesystem::path>& dest = std::nullopt, std::optional<int> id = std::nullopt);

/// Full command-line entry point. Returns the process exit code:
/// 0 success, 2 configuration or I/O error, 3 numerical divergence.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace ltc::cli
