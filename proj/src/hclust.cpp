#include <limits>
#include <numeric>

#include "ltc/tc.hpp"

namespace ltc::tc {

Linkage parse_linkage(const std::string& name) {
  if (name == "complete") return Linkage::Complete;
  if (name == "average") return Linkage::Average;
  if (name == "single") return Linkage::Single;
  fail(Errc::InvalidArgument, "unknown linkage '" + name + "'");
}

std::string to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::Complete: return "complete";
    case Linkage::Average: return "average";
    case Linkage::Single: return "single";
  }
  return "?";
}

namespace {

// Condensed upper-triangular distance storage.
class PairDistances {
 public:
  explicit PairDistances(Index n) : n_(n), d_(static_cast<std::size_t>(n * (n - 1) / 2)) {}
  double& operator()(Index i, Index j) {
    if (i > j) std::swap(i, j);
    return d_[static_cast<std::size_t>(i * n_ - i * (i + 1) / 2 + (j - i - 1))];
  }

 private:
  Index n_;
  std::vector<double> d_;
};

}  // namespace

Hierarchy agglomerative(const Eigen::Ref<const Eigen::MatrixXd>& Z, Index k, Linkage linkage) {
  const Index n = Z.rows();
  require(k >= 1, Errc::InvalidArgument, "cluster count must be >= 1");
  require(n >= k, Errc::TooFewSamples,
          "need at least k=" + std::to_string(k) + " samples, have " + std::to_string(n));
  require(Z.allFinite(), Errc::NonFiniteValue, "non-finite latent vector");

  PairDistances dist(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) dist(i, j) = (Z.row(i) - Z.row(j)).norm();

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<char> active(static_cast<std::size_t>(n), 1);
  std::vector<Index> size(static_cast<std::size_t>(n), 1);
  std::vector<Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  // Nearest active neighbour with a larger index (lowest index on ties).
  std::vector<Index> nn(static_cast<std::size_t>(n), -1);
  std::vector<double> nnd(static_cast<std::size_t>(n), inf);
  auto rescan = [&](Index i) {
    nn[i] = -1;
    nnd[i] = inf;
    for (Index m = i + 1; m < n; ++m)
      if (active[m] && dist(i, m) < nnd[i]) {
        nnd[i] = dist(i, m);
        nn[i] = m;
      }
  };
  for (Index i = 0; i < n; ++i) rescan(i);

  for (Index clusters = n; clusters > k; --clusters) {
    Index a = -1;
    for (Index i = 0; i < n; ++i)
      if (active[i] && nn[i] >= 0 && (a < 0 || nnd[i] < nnd[a])) a = i;
    const Index b = nn[a];
    for (Index m = 0; m < n; ++m) {
      if (!active[m] || m == a || m == b) continue;
      const double da = dist(a, m), db = dist(b, m);
      switch (linkage) {
        case Linkage::Complete: dist(a, m) = std::max(da, db); break;
        case Linkage::Single: dist(a, m) = std::min(da, db); break;
        case Linkage::Average:
          dist(a, m) = (static_cast<double>(size[a]) * da + static_cast<double>(size[b]) * db) /
                       static_cast<double>(size[a] + size[b]);
          break;
      }
    }
    active[b] = 0;
    size[a] += size[b];
    parent[b] = a;
    rescan(a);
    for (Index m = 0; m < n; ++m) {
      if (!active[m] || m == a) continue;
      if (nn[m] == a || nn[m] == b) {
        rescan(m);
      } else if (m < a && (dist(m, a) < nnd[m] || (dist(m, a) == nnd[m] && a < nn[m]))) {
        nn[m] = a;
        nnd[m] = dist(m, a);
      }
    }
  }

  // Representatives are the lowest member index of each cluster, so numbering
  // clusters by first appearance orders them by lowest member.
  Hierarchy out;
  out.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> id_of_root(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (Index i = 0; i < n; ++i) {
    Index r = i;
    while (parent[r] != r) r = parent[r];
    if (id_of_root[r] < 0) id_of_root[r] = next++;
    out.labels[i] = id_of_root[r];
  }
  out.centroids = Eigen::MatrixXd::Zero(k, Z.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (Index i = 0; i < n; ++i) {
    out.centroids.row(out.labels[i]) += Z.row(i);
    counts(out.labels[i]) += 1.0;
  }
  out.centroids.array().colwise() /= counts.array();
  return out;
}

}  // namespace ltc::tc
