#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ltc {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// N samples of L timesteps over V variables, stored sample-major then
/// time-major: row `i * length + t` holds the V values of sample i at time t.
/// Labels are ground truth and only ever used for evaluation and streaming.
struct TimeSeriesDataset {
  std::string name;
  Index n = 0;
  Index length = 0;
  Index vars = 0;
  /// Timesteps that carry real data; the remainder is edge padding.
  Index valid_length = 0;
  RowMatrix samples;
  std::optional<std::vector<int>> labels;
  std::optional<int> num_classes;

  /// Throws MalformedFile when the invariants (N >= 1, L >= 4, V >= 1, finite
  /// values, labels within [0, C)) do not hold.
  void validate() const;

  auto sample(Index i) { return samples.middleRows(i * length, length); }
  auto sample(Index i) const { return samples.middleRows(i * length, length); }

  /// n x (length * vars) view of the same storage.
  Eigen::Map<const RowMatrix> flattened() const {
    return {samples.data(), n, length * vars};
  }

  TimeSeriesDataset subset(std::span<const Index> indices) const;
};

/// Concatenates along the sample axis. Shapes must agree; labels survive only
/// when both sides carry them.
TimeSeriesDataset concat(const TimeSeriesDataset& a, const TimeSeriesDataset& b);

enum class DataFormat { LongCSV, Binary };

DataFormat parse_format(const std::string& name);

/// Reads a dataset. For LongCSV the labels file defaults to `<stem>.labels.csv`
/// beside the data file and is attached when it exists.
TimeSeriesDataset load_dataset(const std::filesystem::path& path, DataFormat format,
                               const std::optional<std::filesystem::path>& labels_path = std::nullopt);

void save_binary(const TimeSeriesDataset& ds, const std::filesystem::path& path);
void save_long_csv(const TimeSeriesDataset& ds, const std::filesystem::path& path,
                   const std::optional<std::filesystem::path>& labels_path = std::nullopt);

/// Per-variable z-score over all N * L cells (population standard deviation).
TimeSeriesDataset normalize(const TimeSeriesDataset& ds);

/// Pads the time axis up to the next multiple by repeating the final timestep.
TimeSeriesDataset pad_time(const TimeSeriesDataset& ds, Index multiple);

enum class StreamMode { IID, Sequential, ContinuousDrift };

StreamMode parse_stream_mode(const std::string& name);
std::string to_string(StreamMode mode);

struct StreamParams {
  /// Sequential: one task per group, in order. ContinuousDrift: group 0 is the
  /// resident set, group 1 the incoming set. Empty means "one class per group"
  /// (Sequential) or "all but the last class / the last class" (drift).
  std::vector<std::vector<int>> class_groups;
  int num_batches = 10;
  int batch_size = 64;
  double max_fraction = 0.5;
  /// The whole task list is emitted this many times.
  int passes = 1;
};

struct TaskStream {
  StreamMode mode = StreamMode::IID;
  std::vector<TimeSeriesDataset> tasks;
  /// Realized fraction of incoming-class samples per batch (drift mode only).
  std::vector<double> drift_schedule;
};

TaskStream make_stream(const TimeSeriesDataset& ds, StreamMode mode, const StreamParams& params,
                       std::uint64_t seed);

/// Consecutive class groups from sizes, e.g. {6, 2, 2} -> {0..5}, {6, 7}, {8, 9}.
std::vector<std::vector<int>> groups_from_sizes(std::span<const int> sizes);

/// Synthetic benchmark: class c is a sinusoid with base_cycles * (c + 1)
/// cycles and phase band centred at 2*pi*c/classes, with per-sample phase and
/// amplitude jitter. Every sample also carries a class-independent
/// interference tone of random phase, plus Gaussian noise.
struct SinusoidSpec {
  Index n = 300;
  Index length = 64;
  Index vars = 4;
  int classes = 3;
  double noise = 0.1;
  double base_cycles = 1.0;
  /// Half-width of the per-sample phase jitter, in radians.
  double phase_jitter = 0.5;
  double amplitude_jitter = 0.3;
  /// Set the amplitude to 0 for pure class tones.
  double interference_amplitude = 1.0;
  double interference_cycles = 9.0;
};

TimeSeriesDataset make_sinusoid_dataset(const SinusoidSpec& spec, std::uint64_t seed);

}  // namespace ltc
