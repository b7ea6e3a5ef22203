#include "ltc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "ltc/error.hpp"

namespace ltc::train {

void TrainConfig::validate() const {
  require(pretrain_epochs >= 0 && train_epochs >= 0, Errc::InvalidArgument, "epoch counts must be >= 0");
  require(batch_size >= 1, Errc::InvalidArgument, "batch size must be >= 1");
  require(lr > 0.0 && std::isfinite(lr), Errc::InvalidArgument, "learning rate must be positive");
  require(alpha > 0.0, Errc::InvalidArgument, "alpha must be positive");
  model.validate();
}

std::string to_string(Phase phase) { return phase == Phase::Mse ? "mse" : "kld"; }

namespace {

std::uint64_t fnv1a(const Eigen::MatrixXd& m) {
  std::uint64_t h = 1469598103934665603ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  for (std::size_t i = 0; i < sizeof(double) * static_cast<std::size_t>(m.size()); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

template <typename F>
auto numerically_guarded(F&& f, const char* phase) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::NonFiniteValue) fail(Errc::NonFiniteLoss, std::string(phase) + " diverged: " + e.what());
    throw;
  }
}

}  // namespace

Evaluation evaluate(const ctae::CtaeModel& model, const tc::TcState<double>& state, const TimeSeriesDataset& ds) {
  const Eigen::MatrixXd Z = ctae::encode(model, ds);
  Evaluation ev;
  ev.Q = tc::soft_assign(Z, state);
  ev.P = tc::target_distribution(ev.Q).P;
  ev.confidence = tc::confidence(ev.P);
  ev.labels = hard_assign(ev.Q);
  return ev;
}

std::vector<EpochRecord> train_joint(ctae::CtaeModel& model, tc::TcState<double>& state, const TimeSeriesDataset& ds,
                                     const TrainConfig& cfg) {
  cfg.validate();
  state.validate();
  require(state.dim() == model.latent_dim(), Errc::DimensionMismatch, "centroid width != latent dimension");
  require(ds.length == model.length && ds.vars == model.vars, Errc::ShapeMismatch, "dataset shape != model shape");

  nn::ParamStore mu_store;
  mu_store.add("mu", state.k(), state.dim());
  mu_store.value(0) = state.centroids;

  std::vector<EpochRecord> trace;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<Index> order(static_cast<std::size_t>(ds.n));
  std::iota(order.begin(), order.end(), Index{0});
  nn::Workspace ws;

  for (int epoch = 1; epoch <= cfg.train_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = Phase::Kld;
    const Eigen::MatrixXd Z = numerically_guarded([&] { return Eigen::MatrixXd(ctae::encode(model, ds)); }, "clustering");
    const Eigen::MatrixXd Q = tc::soft_assign(Z, state);
    const Eigen::MatrixXd P = tc::target_distribution(Q).P;
    rec.loss = tc::kld_loss(P, Q) / static_cast<double>(ds.n);
    rec.confidence = tc::confidence(P);
    rec.target_hash_begin = fnv1a(P);
    require(std::isfinite(rec.loss), Errc::NonFiniteLoss, "clustering loss is not finite");

    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < ds.n; start += cfg.batch_size) {
      const Index count = std::min(cfg.batch_size, ds.n - start);
      const std::span<const Index> batch(order.data() + start, static_cast<std::size_t>(count));
      auto grads = nn::zero_grads(model.encoder_params);
      Eigen::MatrixXd d_mu;
      numerically_guarded(
          [&] {
            const nn::Tensor latent =
                nn::forward(model.encoder_layers, model.encoder_params, ctae::batch_tensor(ds, batch), ws);
            const Eigen::MatrixXd Zb = ctae::flatten(latent);
            const Eigen::MatrixXd Qb = tc::soft_assign(Zb, state);
            Eigen::MatrixXd Pb(count, state.k());
            for (Index i = 0; i < count; ++i) Pb.row(i) = P.row(batch[static_cast<std::size_t>(i)]);
            const RowMatrix dZ = tc::grad_z(Zb, state, Pb, Qb) / static_cast<double>(count);
            d_mu = tc::grad_mu(Zb, state, Pb, Qb) / static_cast<double>(count);
            nn::backward(model.encoder_layers, model.encoder_params, ws,
                         ctae::unflatten(dZ, latent.time, latent.channels), grads);
            return 0;
          },
          "clustering");
      nn::adam_step(model.encoder_params, grads, cfg.lr);
      nn::adam_step(mu_store, nn::GradStore{d_mu}, cfg.lr);
      state.centroids = mu_store.value(0);
      require(state.centroids.allFinite(), Errc::NonFiniteLoss, "centroids diverged");
    }
    rec.target_hash_end = fnv1a(P);
    trace.push_back(rec);
  }
  state.p_c = numerically_guarded([&] { return evaluate(model, state, ds).confidence; }, "clustering");
  return trace;
}

TrainedModel train_full_from(ctae::CtaeModel initial, const TimeSeriesDataset& ds, Index k, const TrainConfig& cfg) {
  cfg.validate();
  require(k >= 1, Errc::InvalidArgument, "k must be >= 1");
  require(ds.n >= k, Errc::TooFewSamples, "fewer samples than clusters");
  TrainedModel out;
  out.ctae = std::move(initial);
  ctae::PretrainConfig pcfg{cfg.pretrain_epochs, cfg.batch_size, cfg.lr, cfg.seed};
  const auto mse = ctae::pretrain(out.ctae, ds, pcfg);
  for (std::size_t e = 0; e < mse.size(); ++e) {
    EpochRecord rec;
    rec.epoch = static_cast<int>(e) + 1;
    rec.phase = Phase::Mse;
    rec.loss = mse[e];
    out.trace.push_back(rec);
  }
  const Eigen::MatrixXd Z = numerically_guarded([&] { return Eigen::MatrixXd(ctae::encode(out.ctae, ds)); }, "encoding");
  const tc::Hierarchy h = tc::agglomerative(Z, k, cfg.linkage);
  out.tc.centroids = h.centroids;
  out.tc.alpha = cfg.alpha;
  if (cfg.train_epochs == 0) {
    out.tc.p_c = evaluate(out.ctae, out.tc, ds).confidence;
    out.assignments = h.labels;
    return out;
  }
  const auto kld = train_joint(out.ctae, out.tc, ds, cfg);
  out.trace.insert(out.trace.end(), kld.begin(), kld.end());
  out.assignments = evaluate(out.ctae, out.tc, ds).labels;
  return out;
}

TrainedModel train_full(const TimeSeriesDataset& ds, Index k, const TrainConfig& cfg) {
  ctae::CtaeConfig mc = cfg.model;
  mc.seed = cfg.seed;
  return train_full_from(ctae::build_ctae(mc, ds.length, ds.vars), ds, k, cfg);
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& trace) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), Errc::DiskWriteFailure, "cannot write " + path.string());
  out.precision(12);
  out << "epoch,phase,loss,confidence\n";
  for (const auto& r : trace) {
    out << r.epoch << ',' << to_string(r.phase) << ',' << r.loss << ',';
    if (r.confidence) out << *r.confidence;
    out << '\n';
  }
}

}  // namespace ltc::train
