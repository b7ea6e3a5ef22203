#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ltc/ctae.hpp"
#include "ltc/data.hpp"
#include "ltc/tc.hpp"

namespace ltc::train {

struct TrainConfig {
  int pretrain_epochs = 10;
  int train_epochs = 100;
  Index batch_size = 64;
  double lr = 1e-3;
  double alpha = 1.0;
  tc::Linkage linkage = tc::Linkage::Complete;
  ctae::CtaeConfig model;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Phase { Mse, Kld };

struct EpochRecord {
  int epoch = 0;  // 1-based within its phase
  Phase phase = Phase::Mse;
  double loss = 0.0;
  /// confidence(P) at the epoch's target refresh; unset for the MSE phase.
  std::optional<double> confidence;
  /// Hash of the frozen target at the start and at the end of the epoch.
  std::uint64_t target_hash_begin = 0;
  std::uint64_t target_hash_end = 0;
};

struct TrainedModel {
  ctae::CtaeModel ctae;
  tc::TcState<double> tc;
  std::vector<EpochRecord> trace;
  std::vector<int> assignments;

  Index k() const { return tc.k(); }
};

/// Cluster id per row: argmax_j q_ij, lowest j on ties.
template <typename DerivedQ>
std::vector<int> hard_assign(const Eigen::MatrixBase<DerivedQ>& Q) {
  std::vector<int> labels(static_cast<std::size_t>(Q.rows()));
  for (Index i = 0; i < Q.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < Q.cols(); ++j)
      if (Q(i, j) > Q(i, best)) best = j;
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

/// Phase 2: refines the encoder and the centroids against the KL objective.
/// The target is recomputed full-batch once per epoch and frozen within it;
/// the decoder is never touched. On return tc.p_c holds the confidence on
/// `ds` under the final parameters.
std::vector<EpochRecord> train_joint(ctae::CtaeModel& model, tc::TcState<double>& state, const TimeSeriesDataset& ds,
                                     const TrainConfig& cfg);

/// Pretraining, hierarchical centroid initialization, then Phase 2.
TrainedModel train_full(const TimeSeriesDataset& ds, Index k, const TrainConfig& cfg);

/// As train_full but starting from existing autoencoder parameters.
TrainedModel train_full_from(ctae::CtaeModel initial, const TimeSeriesDataset& ds, Index k, const TrainConfig& cfg);

struct Evaluation {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd P;
  double confidence = 0.0;
  std::vector<int> labels;
};

/// Encodes ds and scores it against the model's centroids.
Evaluation evaluate(const ctae::CtaeModel& model, const tc::TcState<double>& state, const TimeSeriesDataset& ds);

/// `epoch,phase,loss,confidence`
void write_trace_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& trace);

std::string to_string(Phase phase);

}  // namespace ltc::train
