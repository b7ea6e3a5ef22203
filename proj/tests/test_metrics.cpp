#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "ltc/metrics.hpp"
#include "support.hpp"

using namespace ltc;
using ltc::testing::error_code;

namespace {

// Best matched count over every injective map from clusters to classes (or
// classes to clusters when there are more classes).
double brute_accuracy(const std::vector<int>& pred, const std::vector<int>& truth, int J, int K) {
  const int m = std::max(J, K);
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  int best = 0;
  do {
    int hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (perm[static_cast<std::size_t>(pred[i])] == truth[i]) ++hits;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("accuracy examples") {
  const std::vector<int> truth = {0, 0, 1, 1, 1};
  CHECK(metrics::clustering_accuracy(truth, truth) == 1.0);
  CHECK(metrics::clustering_accuracy(std::vector<int>{4, 4, 2, 2, 2}, truth) == 1.0);
  CHECK(metrics::clustering_accuracy(std::vector<int>{1, 1, 1, 0, 0}, truth) == doctest::Approx(0.8));
  CHECK(error_code([&] { metrics::clustering_accuracy(std::vector<int>{0, 1}, truth); }) == Errc::LengthMismatch);
}

TEST_CASE("purity examples") {
  // Cluster 0 holds {A, A, B}, cluster 1 holds {B, B}.
  CHECK(metrics::purity(std::vector<int>{0, 0, 0, 1, 1}, std::vector<int>{0, 0, 1, 1, 1}) == doctest::Approx(0.8));
  CHECK(metrics::purity(std::vector<int>(10, 0), std::vector<int>{0, 0, 0, 0, 0, 0, 1, 1, 1, 1}) ==
        doctest::Approx(0.6));
  const std::vector<int> t = {2, 0, 1, 1};
  CHECK(metrics::purity(t, t) == 1.0);
  CHECK(error_code([&] { metrics::purity(std::vector<int>{0}, t); }) == Errc::LengthMismatch);
}

TEST_CASE("contingency table") {
  const auto table = metrics::contingency(std::vector<int>{5, 5, 9, 9, 9}, std::vector<int>{1, 3, 3, 3, 1});
  CHECK(table.n == 5);
  REQUIRE(table.counts.rows() == 2);
  REQUIRE(table.counts.cols() == 2);
  CHECK(table.counts(0, 0) == 1);
  CHECK(table.counts(0, 1) == 1);
  CHECK(table.counts(1, 0) == 1);
  CHECK(table.counts(1, 1) == 2);
}

TEST_CASE("accuracy matches the brute-force oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int J = 1 + static_cast<int>(rng() % 6);
    const int K = 1 + static_cast<int>(rng() % 6);
    const int n = 1 + static_cast<int>(rng() % 40);
    std::vector<int> pred(n), truth(n);
    for (int i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng() % J);
      truth[i] = static_cast<int>(rng() % K);
    }
    // Compact ids so the oracle's index space matches what is present.
    auto compact = [](std::vector<int>& v) {
      std::vector<int> ids = v;
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      for (int& x : v) x = static_cast<int>(std::lower_bound(ids.begin(), ids.end(), x) - ids.begin());
      return static_cast<int>(ids.size());
    };
    const int Jc = compact(pred), Kc = compact(truth);
    const double acc = metrics::clustering_accuracy(pred, truth);
    const double pur = metrics::purity(pred, truth);
    CHECK(acc == doctest::Approx(brute_accuracy(pred, truth, Jc, Kc)).epsilon(1e-12));
    CHECK(acc >= 0.0);
    CHECK(acc <= pur + 1e-15);
    CHECK(pur <= 1.0);

    // Renaming clusters changes nothing.
    std::vector<int> renamed(pred);
    for (int& x : renamed) x = 17 - 3 * x;
    CHECK(metrics::clustering_accuracy(renamed, truth) == acc);
    CHECK(metrics::purity(renamed, truth) == pur);
  }
}

TEST_CASE("matching solves small assignment problems") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd W = ltc::testing::random_matrix(5, 5, rng, 0, 10);
    const auto match = metrics::max_weight_matching(W);
    double got = 0.0;
    for (Index r = 0; r < 5; ++r) got += W(r, match[static_cast<std::size_t>(r)]);
    std::vector<int> perm = {0, 1, 2, 3, 4};
    double best = 0.0;
    do {
      double s = 0.0;
      for (int r = 0; r < 5; ++r) s += W(r, perm[r]);
      best = std::max(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("k-means") {
  Eigen::MatrixXd X(10, 1);
  X << 0.0, 0.1, 0.2, -0.1, 0.05, 9.0, 9.2, 8.9, 9.1, 9.05;
  const std::vector<int> blob = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const auto r = metrics::kmeans(X, 2, 3);
  CHECK(metrics::clustering_accuracy(r.labels, blob) == 1.0);

  const auto all = metrics::kmeans(X, 10, 3);
  CHECK(all.inertia == doctest::Approx(0.0));

  std::mt19937_64 rng(13);
  const Eigen::MatrixXd Y = ltc::testing::random_matrix(60, 5, rng);
  const auto a = metrics::kmeans(Y, 4, 99);
  const auto b = metrics::kmeans(Y, 4, 99);
  CHECK(a.labels == b.labels);
  CHECK(a.centroids == b.centroids);
  CHECK(a.inertia == b.inertia);

  // More restarts never end worse.
  const auto one = metrics::kmeans(Y, 4, 99, {1, 300});
  CHECK(a.inertia <= one.inertia + 1e-12);

  CHECK(error_code([&] { metrics::kmeans(X, 11, 0); }) == Errc::TooFewSamples);
}

}  // TEST_SUITE
