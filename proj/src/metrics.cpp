#include "ltc/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <random>

#include "ltc/error.hpp"

namespace ltc::metrics {

namespace {

std::map<int, Index> compact(std::span<const int> ids) {
  std::map<int, Index> out;
  for (int id : ids) out.emplace(id, 0);
  Index next = 0;
  for (auto& [id, idx] : out) idx = next++;
  return out;
}

}  // namespace

ContingencyTable contingency(std::span<const int> pred, std::span<const int> truth) {
  require(pred.size() == truth.size(), Errc::LengthMismatch,
          "prediction has " + std::to_string(pred.size()) + " labels, truth has " + std::to_string(truth.size()));
  require(!pred.empty(), Errc::InvalidArgument, "metrics of an empty labelling");
  const auto clusters = compact(pred);
  const auto classes = compact(truth);
  ContingencyTable t;
  t.n = static_cast<Index>(pred.size());
  t.counts = Eigen::MatrixXi::Zero(static_cast<Index>(clusters.size()), static_cast<Index>(classes.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) ++t.counts(clusters.at(pred[i]), classes.at(truth[i]));
  return t;
}

// Kuhn-Munkres with row/column potentials, run as a minimisation of -weights.
std::vector<Index> max_weight_matching(const Eigen::MatrixXd& weights) {
  require(weights.rows() == weights.cols(), Errc::DimensionMismatch, "matching needs a square matrix");
  const Index n = weights.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> match_col(n + 1, 0), way(n + 1, 0);  // match_col[c] = row (1-based)
  for (Index r = 1; r <= n; ++r) {
    match_col[0] = r;
    Index c0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[c0] = 1;
      const Index r0 = match_col[c0];
      double delta = inf;
      Index c1 = 0;
      for (Index c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double cur = -weights(r0 - 1, c - 1) - u[r0] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = c0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          c1 = c;
        }
      }
      for (Index c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match_col[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      c0 = c1;
    } while (match_col[c0] != 0);
    do {
      const Index c1 = way[c0];
      match_col[c0] = match_col[c1];
      c0 = c1;
    } while (c0 != 0);
  }
  std::vector<Index> row_to_col(n, -1);
  for (Index c = 1; c <= n; ++c)
    if (match_col[c] > 0) row_to_col[match_col[c] - 1] = c - 1;
  return row_to_col;
}

double clustering_accuracy(std::span<const int> pred, std::span<const int> truth) {
  const auto t = contingency(pred, truth);
  const Index m = std::max(t.counts.rows(), t.counts.cols());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  w.topLeftCorner(t.counts.rows(), t.counts.cols()) = t.counts.cast<double>();
  const auto match = max_weight_matching(w);
  double matched = 0.0;
  for (Index r = 0; r < m; ++r) matched += w(r, match[r]);
  return matched / static_cast<double>(t.n);
}

double purity(std::span<const int> pred, std::span<const int> truth) {
  const auto t = contingency(pred, truth);
  return static_cast<double>(t.counts.rowwise().maxCoeff().sum()) / static_cast<double>(t.n);
}

namespace {

struct Lloyd {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double inertia;
};

Lloyd lloyd(const Eigen::Ref<const Eigen::MatrixXd>& X, Eigen::MatrixXd centroids, int max_iterations) {
  const Index n = X.rows(), k = centroids.rows();
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  Eigen::VectorXd best(n);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      int arg = 0;
      double d = (X.row(i) - centroids.row(0)).squaredNorm();
      for (Index j = 1; j < k; ++j) {
        const double dj = (X.row(i) - centroids.row(j)).squaredNorm();
        if (dj < d) {
          d = dj;
          arg = static_cast<int>(j);
        }
      }
      best(i) = d;
      if (labels[i] != arg) {
        labels[i] = arg;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += X.row(i);
      counts(labels[i]) += 1.0;
    }
    for (Index j = 0; j < k; ++j)
      if (counts(j) > 0) centroids.row(j) = sums.row(j) / counts(j);  // empty clusters keep their centre
  }
  return {std::move(labels), std::move(centroids), best.sum()};
}

Eigen::MatrixXd plus_plus_seeds(const Eigen::Ref<const Eigen::MatrixXd>& X, Index k, std::mt19937_64& rng) {
  const Index n = X.rows();
  Eigen::MatrixXd c(k, X.cols());
  std::uniform_int_distribution<Index> first(0, n - 1);
  c.row(0) = X.row(first(rng));
  Eigen::VectorXd d2 = (X.rowwise() - c.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index j = 1; j < k; ++j) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      double target = unit(rng) * total;
      pick = -1;
      for (Index i = 0; i < n; ++i) {
        if (d2(i) <= 0.0) continue;
        pick = i;
        target -= d2(i);
        if (target <= 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    c.row(j) = X.row(pick);
    d2 = d2.cwiseMin((X.rowwise() - c.row(j)).rowwise().squaredNorm());
  }
  return c;
}

}  // namespace

KMeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& X, Index k, std::uint64_t seed, const KMeansConfig& cfg) {
  require(k >= 1, Errc::InvalidArgument, "k must be >= 1");
  require(X.rows() >= k, Errc::TooFewSamples, "fewer samples than clusters");
  require(cfg.restarts >= 1 && cfg.max_iterations >= 1, Errc::InvalidArgument, "bad k-means schedule");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    Lloyd run = lloyd(X, plus_plus_seeds(X, k, rng), cfg.max_iterations);
    if (run.inertia < best.inertia) {
      best.labels = std::move(run.labels);
      best.centroids = std::move(run.centroids);
      best.inertia = run.inertia;
    }
  }
  return best;
}

}  // namespace ltc::metrics
