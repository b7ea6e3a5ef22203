#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ltc/data.hpp"

namespace ltc::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A batch of sequences: row `b * time + t` holds the channel vector of
/// sequence b at step t. Same layout as TimeSeriesDataset::samples.
struct Tensor {
  Index batch = 0;
  Index time = 0;
  Index channels = 0;
  RowMatrix data;

  Tensor() = default;
  Tensor(Index b, Index t, Index c) : batch(b), time(t), channels(c), data(RowMatrix::Zero(b * t, c)) {}
  Tensor(Index b, Index t, RowMatrix values)
      : batch(b), time(t), channels(values.cols()), data(std::move(values)) {}

  std::vector<Index> shape() const { return {batch, time, channels}; }
  auto sequence(Index b) { return data.middleRows(b * time, time); }
  auto sequence(Index b) const { return data.middleRows(b * time, time); }
};

enum class LayerKind {
  CausalDilatedConv1D,
  MaxPool1D,
  BiLSTM,
  AdditiveAttention,
  TimeDistributedDense,
  Upsample1D,
  TransposedConv1D,
  Activation,
};

enum class ActivationKind { Identity, LeakyRelu, Logistic, Tanh };

std::string to_string(LayerKind kind);
std::string to_string(ActivationKind kind);
LayerKind parse_layer_kind(const std::string& name);
ActivationKind parse_activation(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::Activation;
  std::string name;
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel = 1;
  Index dilation = 1;
  /// LSTM units per direction, or the attention scoring width.
  Index hidden = 0;
  Index pool = 2;
  ActivationKind activation = ActivationKind::Identity;
  /// Index of this layer's first parameter in its ParamStore; -1 when the
  /// layer has not been registered (or has no parameters).
  Index first_param = -1;

  static LayerSpec causal_conv(std::string name, Index in, Index out, Index kernel, Index dilation);
  static LayerSpec max_pool(std::string name, Index channels, Index pool = 2);
  static LayerSpec bilstm(std::string name, Index in, Index hidden);
  static LayerSpec attention(std::string name, Index channels, Index score_width);
  static LayerSpec dense(std::string name, Index in, Index out);
  static LayerSpec upsample(std::string name, Index channels, Index factor = 2);
  static LayerSpec transposed_conv(std::string name, Index in, Index out, Index kernel);
  static LayerSpec act(std::string name, Index channels, ActivationKind kind);

  Index output_channels() const;
  Index output_time(Index input_time) const;
  Index param_count() const;
};

struct Param {
  std::string name;
  Matrix value;
  Matrix m;  // Adam first moment
  Matrix v;  // Adam second moment
};

/// Named parameters with their Adam accumulators. Gradients live in a
/// GradStore aligned index-for-index with the store.
class ParamStore {
 public:
  Index add(std::string name, Index rows, Index cols);

  Index size() const { return static_cast<Index>(params_.size()); }
  Param& operator[](Index i) { return params_[static_cast<std::size_t>(i)]; }
  const Param& operator[](Index i) const { return params_[static_cast<std::size_t>(i)]; }
  Matrix& value(Index i) { return (*this)[i].value; }
  const Matrix& value(Index i) const { return (*this)[i].value; }
  /// -1 when absent.
  Index find(const std::string& name) const;

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Total scalar count.
  Index numel() const;
  bool values_equal(const ParamStore& other) const;

 private:
  std::vector<Param> params_;
  std::int64_t step_ = 0;
};

using GradStore = std::vector<Matrix>;

GradStore zero_grads(const ParamStore& store);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// In-place Adam update with bias correction; increments the step counter.
void adam_step(ParamStore& params, const GradStore& grads, double lr, const AdamConfig& cfg = {});

/// Registers every layer's parameters in a fresh store (setting first_param)
/// and draws Glorot-uniform weights. Biases start at zero except the LSTM
/// forget gate, which starts at one.
ParamStore init_params(std::span<LayerSpec> specs, std::uint64_t seed, const std::string& prefix = "");

/// Per-layer scratch written by forward and consumed by backward.
struct LayerCache {
  bool valid = false;
  Index batch = 0;
  Index time = 0;
  std::vector<RowMatrix> mats;
  std::vector<Index> indices;
};

Tensor layer_forward(const LayerSpec& spec, const ParamStore& params, const Tensor& x, LayerCache& cache);

/// Accumulates parameter gradients into `grads` and returns dL/dx.
/// Invalidates the cache.
Tensor layer_backward(const LayerSpec& spec, const ParamStore& params, LayerCache& cache, const Tensor& dy,
                      GradStore& grads);

/// Attention weights of an AdditiveAttention layer, one per row of x.data;
/// each sequence's weights sum to one.
Vector attention_weights(const LayerSpec& spec, const ParamStore& params, const Tensor& x);

struct Workspace {
  std::vector<LayerCache> caches;
};

Tensor forward(std::span<const LayerSpec> layers, const ParamStore& params, const Tensor& x, Workspace& ws);
/// Forward without keeping caches.
Tensor infer(std::span<const LayerSpec> layers, const ParamStore& params, const Tensor& x);
Tensor backward(std::span<const LayerSpec> layers, const ParamStore& params, Workspace& ws, const Tensor& dy,
                GradStore& grads);

// Checkpoint: <dir>/manifest.json plus one little-endian float64 blob per
// parameter (row-major).
void save_checkpoint(const std::filesystem::path& dir, const ParamStore& params, std::span<const LayerSpec> layers);

struct Checkpoint {
  ParamStore params;
  std::vector<LayerSpec> layers;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace ltc::nn
