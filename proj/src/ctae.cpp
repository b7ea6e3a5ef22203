#include "ltc/ctae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "ltc/error.hpp"

namespace ltc::ctae {

namespace fs = std::filesystem;
using nn::LayerSpec;
using nn::Tensor;

void CtaeConfig::validate() const {
  require(conv_channels >= 1 && kernel_width >= 1 && lstm_hidden_1 >= 1 && lstm_hidden_2 >= 1 && attention_width >= 1,
          Errc::InvalidArgument, "architecture sizes must be >= 1");
  require(pool_size == 2, Errc::InvalidArgument, "pool_size is fixed at 2");
}

CtaeModel build_ctae(const CtaeConfig& config, Index length, Index vars) {
  config.validate();
  require(length >= 4 && length % 4 == 0, Errc::InvalidLength,
          "series length " + std::to_string(length) + " is not a positive multiple of 4; pad it first");
  require(vars >= 1, Errc::InvalidArgument, "need at least one variable");
  CtaeModel m;
  m.config = config;
  m.length = length;
  m.vars = vars;
  const Index C = config.conv_channels, K = config.kernel_width;
  const Index h1 = config.lstm_hidden_1, h2 = config.lstm_hidden_2, A = config.attention_width;
  const auto act = config.activation;
  m.encoder_layers = {
      LayerSpec::causal_conv("conv0", vars, C, K, 1),
      LayerSpec::act("act0", C, act),
      LayerSpec::max_pool("pool0", C, 2),
      LayerSpec::causal_conv("conv1", C, C, K, 2),
      LayerSpec::act("act1", C, act),
      LayerSpec::max_pool("pool1", C, 2),
      LayerSpec::bilstm("lstm0", C, h1),
      LayerSpec::attention("att0", 2 * h1, A),
      LayerSpec::bilstm("lstm1", 2 * h1, h2),
      LayerSpec::attention("att1", 2 * h2, A),
  };
  m.decoder_layers = {
      LayerSpec::dense("dense", 2 * h2, C),
      LayerSpec::act("act2", C, act),
      LayerSpec::upsample("up0", C, 2),
      LayerSpec::transposed_conv("tconv0", C, C, K),
      LayerSpec::act("act3", C, act),
      LayerSpec::upsample("up1", C, 2),
      LayerSpec::transposed_conv("tconv1", C, vars, K),
  };
  m.encoder_params = nn::init_params(m.encoder_layers, config.seed, "enc.");
  m.decoder_params = nn::init_params(m.decoder_layers, config.seed * 2654435761ull + 1, "dec.");
  return m;
}

Tensor batch_tensor(const TimeSeriesDataset& ds, std::span<const Index> indices) {
  const Index B = static_cast<Index>(indices.size());
  Tensor x(B, ds.length, ds.vars);
  for (Index b = 0; b < B; ++b) x.sequence(b) = ds.sample(indices[static_cast<std::size_t>(b)]);
  return x;
}

Tensor batch_tensor(const TimeSeriesDataset& ds) { return Tensor(ds.n, ds.length, ds.samples); }

namespace {

void check_input(const CtaeModel& model, const Tensor& x) {
  require(x.time == model.length && x.channels == model.vars, Errc::ShapeMismatch,
          "input is (" + std::to_string(x.time) + " x " + std::to_string(x.channels) + "), model expects (" +
              std::to_string(model.length) + " x " + std::to_string(model.vars) + ")");
}

}  // namespace

Tensor encode_sequence(const CtaeModel& model, const Tensor& x) {
  check_input(model, x);
  return nn::infer(model.encoder_layers, model.encoder_params, x);
}

RowMatrix flatten(const Tensor& latent) {
  return Eigen::Map<const RowMatrix>(latent.data.data(), latent.batch, latent.time * latent.channels);
}

Tensor unflatten(const RowMatrix& rows, Index time, Index channels) {
  require(rows.cols() == time * channels, Errc::ShapeMismatch, "flattened width != time * channels");
  return Tensor(rows.rows(), time, RowMatrix(Eigen::Map<const RowMatrix>(rows.data(), rows.rows() * time, channels)));
}

RowMatrix encode(const CtaeModel& model, const Tensor& x) { return flatten(encode_sequence(model, x)); }

RowMatrix encode(const CtaeModel& model, const TimeSeriesDataset& ds, Index chunk) {
  require(ds.length == model.length && ds.vars == model.vars, Errc::ShapeMismatch, "dataset shape != model shape");
  RowMatrix Z(ds.n, model.latent_dim());
  std::vector<Index> idx;
  for (Index start = 0; start < ds.n; start += chunk) {
    const Index count = std::min(chunk, ds.n - start);
    idx.resize(static_cast<std::size_t>(count));
    std::iota(idx.begin(), idx.end(), start);
    Z.middleRows(start, count) = encode(model, batch_tensor(ds, idx));
  }
  return Z;
}

Tensor decode(const CtaeModel& model, const Tensor& latent) {
  require(latent.time == model.latent_time() && latent.channels == model.latent_channels(), Errc::ShapeMismatch,
          "latent sequence does not match the model");
  return nn::infer(model.decoder_layers, model.decoder_params, latent);
}

namespace {

void check_pair(const Tensor& x, const Tensor& recon, Index valid_length) {
  require(x.batch == recon.batch && x.time == recon.time && x.channels == recon.channels, Errc::ShapeMismatch,
          "reconstruction shape differs from input");
  require(valid_length >= 1 && valid_length <= x.time, Errc::InvalidArgument, "bad valid length");
}

}  // namespace

double mse_loss(const Tensor& x, const Tensor& recon, Index valid_length) {
  check_pair(x, recon, valid_length);
  double total = 0.0;
  for (Index b = 0; b < x.batch; ++b)
    total += (x.sequence(b).topRows(valid_length) - recon.sequence(b).topRows(valid_length)).squaredNorm();
  return total / static_cast<double>(x.batch * valid_length * x.channels);
}

Tensor mse_loss_grad(const Tensor& x, const Tensor& recon, Index valid_length) {
  check_pair(x, recon, valid_length);
  Tensor g(x.batch, x.time, x.channels);
  const double scale = 2.0 / static_cast<double>(x.batch * valid_length * x.channels);
  for (Index b = 0; b < x.batch; ++b)
    g.sequence(b).topRows(valid_length) =
        scale * (recon.sequence(b).topRows(valid_length) - x.sequence(b).topRows(valid_length));
  return g;
}

std::vector<double> pretrain(CtaeModel& model, const TimeSeriesDataset& ds, const PretrainConfig& cfg) {
  require(cfg.epochs >= 0 && cfg.batch_size >= 1, Errc::InvalidArgument, "bad pretrain schedule");
  require(ds.length == model.length && ds.vars == model.vars, Errc::ShapeMismatch, "dataset shape != model shape");
  std::vector<double> trace;
  std::mt19937_64 rng(cfg.seed);
  std::vector<Index> order(static_cast<std::size_t>(ds.n));
  std::iota(order.begin(), order.end(), Index{0});
  nn::Workspace enc_ws, dec_ws;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (Index start = 0; start < ds.n; start += cfg.batch_size) {
      const Index count = std::min(cfg.batch_size, ds.n - start);
      const std::span<const Index> batch(order.data() + start, static_cast<std::size_t>(count));
      const Tensor x = batch_tensor(ds, batch);
      double loss = 0.0;
      auto enc_grads = nn::zero_grads(model.encoder_params);
      auto dec_grads = nn::zero_grads(model.decoder_params);
      try {
        const Tensor z = nn::forward(model.encoder_layers, model.encoder_params, x, enc_ws);
        const Tensor recon = nn::forward(model.decoder_layers, model.decoder_params, z, dec_ws);
        loss = mse_loss(x, recon, ds.valid_length);
        const Tensor dz = nn::backward(model.decoder_layers, model.decoder_params, dec_ws,
                                       mse_loss_grad(x, recon, ds.valid_length), dec_grads);
        nn::backward(model.encoder_layers, model.encoder_params, enc_ws, dz, enc_grads);
      } catch (const Error& e) {
        if (e.code() == Errc::NonFiniteValue) fail(Errc::NonFiniteLoss, std::string("pretraining diverged: ") + e.what());
        throw;
      }
      require(std::isfinite(loss), Errc::NonFiniteLoss, "pretraining loss is not finite; lower the learning rate");
      nn::adam_step(model.encoder_params, enc_grads, cfg.lr);
      nn::adam_step(model.decoder_params, dec_grads, cfg.lr);
      weighted += loss * static_cast<double>(count);
    }
    trace.push_back(weighted / static_cast<double>(ds.n));
  }
  return trace;
}

namespace {

nlohmann::json config_json(const CtaeModel& m) {
  const auto& c = m.config;
  return {{"format_version", 1},
          {"conv_channels", c.conv_channels},
          {"kernel_width", c.kernel_width},
          {"lstm_hidden_1", c.lstm_hidden_1},
          {"lstm_hidden_2", c.lstm_hidden_2},
          {"pool_size", c.pool_size},
          {"attention_width", c.attention_width},
          {"activation", nn::to_string(c.activation)},
          {"seed", c.seed},
          {"length", m.length},
          {"vars", m.vars}};
}

}  // namespace

void save_ctae(const fs::path& dir, const CtaeModel& model) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, Errc::DiskWriteFailure, "cannot create " + dir.string());
  std::ofstream out(dir / "ctae.json", std::ios::trunc);
  out << config_json(model).dump(2) << '\n';
  require(static_cast<bool>(out), Errc::DiskWriteFailure, "cannot write " + (dir / "ctae.json").string());
  nn::save_checkpoint(dir / "encoder", model.encoder_params, model.encoder_layers);
  nn::save_checkpoint(dir / "decoder", model.decoder_params, model.decoder_layers);
}

CtaeModel load_ctae(const fs::path& dir) {
  const fs::path cpath = dir / "ctae.json";
  require(fs::exists(cpath), Errc::MissingCheckpoint, "no model config in " + dir.string());
  nlohmann::json j;
  try {
    std::ifstream in(cpath);
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::MalformedFile, cpath.string() + ": " + e.what());
  }
  CtaeConfig c;
  c.conv_channels = j.at("conv_channels").get<Index>();
  c.kernel_width = j.at("kernel_width").get<Index>();
  c.lstm_hidden_1 = j.at("lstm_hidden_1").get<Index>();
  c.lstm_hidden_2 = j.at("lstm_hidden_2").get<Index>();
  c.pool_size = j.at("pool_size").get<Index>();
  c.attention_width = j.at("attention_width").get<Index>();
  c.activation = nn::parse_activation(j.at("activation").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  CtaeModel m = build_ctae(c, j.at("length").get<Index>(), j.at("vars").get<Index>());
  auto enc = nn::load_checkpoint(dir / "encoder");
  auto dec = nn::load_checkpoint(dir / "decoder");
  require(enc.params.size() == m.encoder_params.size() && dec.params.size() == m.decoder_params.size(),
          Errc::MalformedFile, "checkpoint does not match its architecture");
  for (Index i = 0; i < enc.params.size(); ++i) {
    require(enc.params.value(i).rows() == m.encoder_params.value(i).rows() &&
                enc.params.value(i).cols() == m.encoder_params.value(i).cols(),
            Errc::MalformedFile, "encoder parameter shape mismatch");
    m.encoder_params.value(i) = enc.params.value(i);
  }
  for (Index i = 0; i < dec.params.size(); ++i) {
    require(dec.params.value(i).rows() == m.decoder_params.value(i).rows() &&
                dec.params.value(i).cols() == m.decoder_params.value(i).cols(),
            Errc::MalformedFile, "decoder parameter shape mismatch");
    m.decoder_params.value(i) = dec.params.value(i);
  }
  return m;
}

}  // namespace ltc::ctae
