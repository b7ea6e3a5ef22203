#pragma once

// Temporal clustering head: Student's-t soft assignment of latent vectors to
// centroids, the sharpened self-training target, the KL objective and its
// closed-form gradients. All functions are templated on the scalar type and
// accept any dense Eigen expression.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ltc/error.hpp"

namespace ltc::tc {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar = double>
struct TcState {
  MatrixX<Scalar> centroids;  // k x d
  Scalar alpha = Scalar(1);
  /// Confidence measured on the training data at the end of training.
  Scalar p_c = Scalar(0);

  Index k() const { return centroids.rows(); }
  Index dim() const { return centroids.cols(); }

  void validate() const {
    require(k() >= 1, Errc::InvalidArgument, "TC state needs at least one centroid");
    require(alpha > Scalar(0), Errc::InvalidArgument, "degrees of freedom must be positive");
    require(centroids.allFinite(), Errc::NonFiniteValue, "non-finite centroid");
  }
};

template <typename Scalar>
struct TargetDistribution {
  MatrixX<Scalar> P;  // n x k
  VectorX<Scalar> f;  // soft cluster frequencies
};

/// n x k matrix of squared Euclidean distances, computed from explicit
/// differences so coincident points give exactly zero.
template <typename DerivedZ, typename DerivedMu>
MatrixX<typename DerivedZ::Scalar> squared_distances(const Eigen::MatrixBase<DerivedZ>& Z,
                                                     const Eigen::MatrixBase<DerivedMu>& mu) {
  using Scalar = typename DerivedZ::Scalar;
  require(Z.cols() == mu.cols(), Errc::DimensionMismatch,
          "latent dim " + std::to_string(Z.cols()) + " != centroid dim " + std::to_string(mu.cols()));
  MatrixX<Scalar> D(Z.rows(), mu.rows());
  for (Index j = 0; j < mu.rows(); ++j) D.col(j) = (Z.rowwise() - mu.row(j)).rowwise().squaredNorm();
  return D;
}

/// q_ij = (1 + |z_i - mu_j|^2 / alpha)^(-(alpha + 1) / 2), row-normalized.
template <typename DerivedZ, typename Scalar>
MatrixX<Scalar> soft_assign(const Eigen::MatrixBase<DerivedZ>& Z, const TcState<Scalar>& state) {
  require(state.alpha > Scalar(0), Errc::DomainError, "alpha must be positive");
  MatrixX<Scalar> K = squared_distances(Z, state.centroids);
  const Scalar a = state.alpha;
  if (a == Scalar(1))
    K = (Scalar(1) + K.array()).inverse().matrix();
  else
    K = (Scalar(1) + K.array() / a).pow(-(a + Scalar(1)) / Scalar(2)).matrix();
  const VectorX<Scalar> rows = K.rowwise().sum();
  return (K.array().colwise() / rows.array()).matrix();
}

/// p_ij = (q_ij^2 / f_j) / sum_j' (q_ij'^2 / f_j') with f_j = sum_i q_ij.
template <typename DerivedQ>
TargetDistribution<typename DerivedQ::Scalar> target_distribution(const Eigen::MatrixBase<DerivedQ>& Q) {
  using Scalar = typename DerivedQ::Scalar;
  TargetDistribution<Scalar> out;
  out.f = Q.colwise().sum().transpose();
  for (Index j = 0; j < out.f.size(); ++j)
    require(out.f(j) > Scalar(0), Errc::DegenerateColumn, "cluster " + std::to_string(j) + " has zero frequency");
  // Written as q * w * (sum q / sum q*w) with w = q / f, which keeps each
  // row's mass and makes a single-row Q map to itself bit for bit (w == 1).
  out.P.resize(Q.rows(), Q.cols());
  for (Index i = 0; i < Q.rows(); ++i) {
    Scalar mass(0), weighted(0);
    for (Index j = 0; j < Q.cols(); ++j) {
      const Scalar w = Q(i, j) / out.f(j);
      out.P(i, j) = w;
      mass += Q(i, j);
      weighted += Q(i, j) * w;
    }
    const Scalar scale = mass / weighted;
    for (Index j = 0; j < Q.cols(); ++j) out.P(i, j) = Q(i, j) * (out.P(i, j) * scale);
  }
  return out;
}

/// sum_ij p_ij log(p_ij / q_ij), natural log. Terms with p_ij = 0 contribute 0.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kld_loss(const Eigen::MatrixBase<DerivedP>& P, const Eigen::MatrixBase<DerivedQ>& Q) {
  using Scalar = typename DerivedP::Scalar;
  require(P.rows() == Q.rows() && P.cols() == Q.cols(), Errc::DimensionMismatch, "P and Q differ in shape");
  require((Q.array() > Scalar(0)).all(), Errc::DomainError, "Q has a nonpositive entry");
  require((P.array() >= Scalar(0)).all(), Errc::DomainError, "P has a negative entry");
  Scalar total(0);
  for (Index i = 0; i < P.rows(); ++i)
    for (Index j = 0; j < P.cols(); ++j)
      if (P(i, j) > Scalar(0)) total += P(i, j) * std::log(P(i, j) / Q(i, j));
  return total;
}

namespace detail {

// W_ij = (alpha + 1) / alpha * (1 + d_ij^2 / alpha)^-1 * (p_ij - q_ij)
template <typename DerivedZ, typename Scalar, typename DerivedP, typename DerivedQ>
MatrixX<Scalar> gradient_weights(const Eigen::MatrixBase<DerivedZ>& Z, const TcState<Scalar>& state,
                                 const Eigen::MatrixBase<DerivedP>& P, const Eigen::MatrixBase<DerivedQ>& Q) {
  require(P.rows() == Z.rows() && Q.rows() == Z.rows() && P.cols() == state.k() && Q.cols() == state.k(),
          Errc::DimensionMismatch, "P/Q do not match (n, k)");
  const Scalar a = state.alpha;
  MatrixX<Scalar> D = squared_distances(Z, state.centroids);
  return ((a + Scalar(1)) / a * (Scalar(1) + D.array() / a).inverse() * (P.array() - Q.array())).matrix();
}

}  // namespace detail

/// dL/dz_i = (alpha+1)/alpha * sum_j (1 + |z_i - mu_j|^2/alpha)^-1 (p_ij - q_ij)(z_i - mu_j),
/// the exact gradient of kld_loss with P held constant.
template <typename DerivedZ, typename Scalar, typename DerivedP, typename DerivedQ>
MatrixX<Scalar> grad_z(const Eigen::MatrixBase<DerivedZ>& Z, const TcState<Scalar>& state,
                       const Eigen::MatrixBase<DerivedP>& P, const Eigen::MatrixBase<DerivedQ>& Q) {
  const MatrixX<Scalar> W = detail::gradient_weights(Z, state, P, Q);
  // sum_j W_ij (z_i - mu_j) = z_i * sum_j W_ij - (W mu)_i
  return (Z.array().colwise() * W.rowwise().sum().array()).matrix() - W * state.centroids;
}

/// dL/dmu_j = -(alpha+1)/alpha * sum_i (1 + |z_i - mu_j|^2/alpha)^-1 (p_ij - q_ij)(z_i - mu_j).
template <typename DerivedZ, typename Scalar, typename DerivedP, typename DerivedQ>
MatrixX<Scalar> grad_mu(const Eigen::MatrixBase<DerivedZ>& Z, const TcState<Scalar>& state,
                        const Eigen::MatrixBase<DerivedP>& P, const Eigen::MatrixBase<DerivedQ>& Q) {
  const MatrixX<Scalar> W = detail::gradient_weights(Z, state, P, Q);
  return (state.centroids.array().colwise() * W.colwise().sum().transpose().array()).matrix() - W.transpose() * Z;
}

/// Mean over samples of max_j p_ij.
template <typename DerivedP>
typename DerivedP::Scalar confidence(const Eigen::MatrixBase<DerivedP>& P) {
  require(P.rows() >= 1, Errc::InvalidArgument, "confidence of an empty assignment");
  return P.rowwise().maxCoeff().mean();
}

enum class Linkage { Complete, Average, Single };

Linkage parse_linkage(const std::string& name);
std::string to_string(Linkage linkage);

struct Hierarchy {
  /// Flat cluster ids in [0, k), numbered by each cluster's lowest member.
  std::vector<int> labels;
  /// k x d member means.
  Eigen::MatrixXd centroids;
};

/// Agglomerative clustering on Euclidean distances, cut at k clusters.
/// Ties merge the lexicographically lowest (i, j) pair.
Hierarchy agglomerative(const Eigen::Ref<const Eigen::MatrixXd>& Z, Index k, Linkage linkage = Linkage::Complete);

inline Eigen::MatrixXd init_centroids(const Eigen::Ref<const Eigen::MatrixXd>& Z, Index k,
                                      Linkage linkage = Linkage::Complete) {
  return agglomerative(Z, k, linkage).centroids;
}

}  // namespace ltc::tc
