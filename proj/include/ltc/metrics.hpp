#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ltc::metrics {

using Index = Eigen::Index;

/// counts(j, c): samples in predicted cluster j with true class c. Cluster and
/// class ids are compacted to [0, J) and [0, K) in ascending order.
struct ContingencyTable {
  Eigen::MatrixXi counts;
  Index n = 0;
};

ContingencyTable contingency(std::span<const int> pred, std::span<const int> truth);

/// Maximum-weight one-to-one assignment on a square (zero-padded) weight
/// matrix. Returns, for every row, the column it is matched to.
std::vector<Index> max_weight_matching(const Eigen::MatrixXd& weights);

/// Fraction of samples whose cluster maps to their class under the best
/// one-to-one cluster -> class mapping.
double clustering_accuracy(std::span<const int> pred, std::span<const int> truth);

/// (1/n) * sum over clusters of the cluster's majority-class count.
double purity(std::span<const int> pred, std::span<const int> truth);

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
};

struct KMeansConfig {
  int restarts = 10;
  int max_iterations = 300;
};

/// Lloyd iterations from k-means++ seeds; the restart with the lowest inertia
/// wins. Deterministic for a given seed.
KMeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& X, Index k, std::uint64_t seed,
                    const KMeansConfig& cfg = {});

}  // namespace ltc::metrics
