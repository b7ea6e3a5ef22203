#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ltc/data.hpp"
#include "ltc/nn.hpp"

namespace ltc::ctae {

/// Architecture sizes. Channel and hidden widths are free choices; the two
/// pooling stages with pool_size 2 are structural (latent length = L / 4).
struct CtaeConfig {
  Index conv_channels = 64;
  Index kernel_width = 3;
  Index lstm_hidden_1 = 64;
  Index lstm_hidden_2 = 16;
  Index pool_size = 2;
  Index attention_width = 16;
  nn::ActivationKind activation = nn::ActivationKind::LeakyRelu;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Encoder:  conv(d=1) > act > pool > conv(d=2) > act > pool >
///           BiLSTM(h1) > attention > BiLSTM(h2) > attention
/// Decoder:  dense > act > upsample > tconv > act > upsample > tconv(V)
struct CtaeModel {
  CtaeConfig config;
  Index length = 0;
  Index vars = 0;
  std::vector<nn::LayerSpec> encoder_layers;
  std::vector<nn::LayerSpec> decoder_layers;
  nn::ParamStore encoder_params;
  nn::ParamStore decoder_params;

  Index latent_time() const { return length / 4; }
  Index latent_channels() const { return 2 * config.lstm_hidden_2; }
  Index latent_dim() const { return latent_time() * latent_channels(); }
  /// Number of encoder layers up to and including the second pooling stage.
  static constexpr std::size_t kConvStackDepth = 6;
};

CtaeModel build_ctae(const CtaeConfig& config, Index length, Index vars);

/// Copies the given samples into a batch tensor.
nn::Tensor batch_tensor(const TimeSeriesDataset& ds, std::span<const Index> indices);
nn::Tensor batch_tensor(const TimeSeriesDataset& ds);

/// Latent sequence (B x L/4 x 2*h2), before flattening.
nn::Tensor encode_sequence(const CtaeModel& model, const nn::Tensor& x);

/// Flattened latent rows (B x latent_dim).
RowMatrix flatten(const nn::Tensor& latent);
nn::Tensor unflatten(const RowMatrix& rows, Index time, Index channels);

RowMatrix encode(const CtaeModel& model, const nn::Tensor& x);
/// Encodes a whole dataset in chunks of `chunk` samples.
RowMatrix encode(const CtaeModel& model, const TimeSeriesDataset& ds, Index chunk = 256);

nn::Tensor decode(const CtaeModel& model, const nn::Tensor& latent);

/// Mean squared error over the first `valid_length` steps of every sequence.
double mse_loss(const nn::Tensor& x, const nn::Tensor& recon, Index valid_length);
/// Gradient of mse_loss with respect to `recon`.
nn::Tensor mse_loss_grad(const nn::Tensor& x, const nn::Tensor& recon, Index valid_length);

struct PretrainConfig {
  int epochs = 10;
  Index batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Adam on the reconstruction loss. Returns the mean loss of every epoch.
std::vector<double> pretrain(CtaeModel& model, const TimeSeriesDataset& ds, const PretrainConfig& cfg);

void save_ctae(const std::filesystem::path& dir, const CtaeModel& model);
CtaeModel load_ctae(const std::filesystem::path& dir);

}  // namespace ltc::ctae
