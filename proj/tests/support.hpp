#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ltc/error.hpp"
#include "ltc/nn.hpp"

namespace ltc::testing {

Eigen::MatrixXd random_matrix(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);

/// ||a - b|| / max(||a||, ||b||, floor). The default floor only keeps two zero
/// gradients from dividing by zero; a larger one bounds the absolute error of
/// gradients that are too small for central differences to resolve.
double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric, double floor = 1e-12);

/// Central differences of f with respect to every entry of x; x is restored.
template <typename M>
Eigen::MatrixXd numeric_gradient(const std::function<double()>& f, M& x, double eps = 1e-5) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      const double keep = x(i, j);
      x(i, j) = keep + eps;
      const double up = f();
      x(i, j) = keep - eps;
      const double down = f();
      x(i, j) = keep;
      g(i, j) = (up - down) / (2.0 * eps);
    }
  return g;
}

struct GradientReport {
  double input_error = 0.0;
  /// Worst error over the layer's parameters (0 when it has none).
  double param_error = 0.0;
  std::string worst_param;

  double worst() const { return std::max(input_error, param_error); }
};

/// Finite-difference check of one layer under the loss sum(y .* r) for a
/// fixed random r. Inputs are drawn away from kinks (pool ties, the leaky
/// rectifier's corner) so central differences stay valid.
GradientReport check_layer_gradients(nn::LayerSpec spec, Index batch, Index time, std::uint64_t seed);

/// Same check for a stack of layers.
GradientReport check_stack_gradients(std::vector<nn::LayerSpec> layers, Index batch, Index time, std::uint64_t seed);

/// The code of the ltc::Error thrown by f, or nullopt when nothing was thrown.
std::optional<Errc> error_code(const std::function<void()>& f);

/// A fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// True when both files exist and have identical bytes.
bool files_identical(const std::filesystem::path& a, const std::filesystem::path& b);

/// True when both trees contain the same relative file paths with identical bytes.
bool trees_identical(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace ltc::testing
