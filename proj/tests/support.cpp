#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

namespace ltc::testing {

namespace fs = std::filesystem;

Eigen::MatrixXd random_matrix(Index rows, Index cols, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric, double floor) {
  const double denom = std::max({analytic.norm(), numeric.norm(), floor});
  return (analytic - numeric).norm() / denom;
}

namespace {

RowMatrix kink_free_input(const std::vector<nn::LayerSpec>& layers, Index rows, Index cols, std::mt19937_64& rng) {
  const auto& first = layers.front();
  if (first.kind == nn::LayerKind::MaxPool1D) {
    // Distinct values 0.01 apart so no eps-sized nudge can change an argmax.
    std::vector<double> vals(static_cast<std::size_t>(rows * cols));
    std::iota(vals.begin(), vals.end(), 0.0);
    std::shuffle(vals.begin(), vals.end(), rng);
    RowMatrix x(rows, cols);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = 0.01 * vals[static_cast<std::size_t>(i)] - 0.5;
    return x;
  }
  RowMatrix x = random_matrix(rows, cols, rng);
  if (first.kind == nn::LayerKind::Activation && first.activation == nn::ActivationKind::LeakyRelu)
    for (Index i = 0; i < x.size(); ++i) {
      double& v = x.data()[i];
      v = (v < 0 ? -1.0 : 1.0) * (0.05 + std::abs(v));
    }
  return x;
}

}  // namespace

GradientReport check_stack_gradients(std::vector<nn::LayerSpec> layers, Index batch, Index time, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::ParamStore params = nn::init_params(layers, seed);
  // General position: random values everywhere, biases included.
  for (auto& p : params) p.value = random_matrix(p.value.rows(), p.value.cols(), rng, -0.5, 0.5);

  nn::Tensor x(batch, time, kink_free_input(layers, batch * time, layers.front().in_channels, rng));
  const nn::Tensor probe = nn::infer(layers, params, x);
  const RowMatrix r = random_matrix(probe.data.rows(), probe.data.cols(), rng);
  auto loss = [&] { return (nn::infer(layers, params, x).data.array() * r.array()).sum(); };

  nn::Workspace ws;
  nn::forward(layers, params, x, ws);
  nn::GradStore grads = nn::zero_grads(params);
  const nn::Tensor dx = nn::backward(layers, params, ws, nn::Tensor(probe.batch, probe.time, r), grads);

  GradientReport rep;
  rep.input_error = relative_error(Eigen::MatrixXd(dx.data), numeric_gradient(loss, x.data));
  for (Index i = 0; i < params.size(); ++i) {
    const double e = relative_error(grads[static_cast<std::size_t>(i)], numeric_gradient(loss, params.value(i)));
    if (e >= rep.param_error) {
      rep.param_error = e;
      rep.worst_param = params[i].name;
    }
  }
  return rep;
}

GradientReport check_layer_gradients(nn::LayerSpec spec, Index batch, Index time, std::uint64_t seed) {
  return check_stack_gradients({std::move(spec)}, batch, time, seed);
}

std::optional<Errc> error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ltc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool files_identical(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  const std::string sa((std::istreambuf_iterator<char>(fa)), {});
  const std::string sb((std::istreambuf_iterator<char>(fb)), {});
  return sa == sb;
}

bool trees_identical(const fs::path& a, const fs::path& b) {
  auto listing = [](const fs::path& root) {
    std::set<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) files.insert(fs::relative(e.path(), root));
    return files;
  };
  if (!fs::is_directory(a) || !fs::is_directory(b)) return false;
  const auto fa = listing(a), fb = listing(b);
  if (fa != fb || fa.empty()) return false;
  return std::all_of(fa.begin(), fa.end(), [&](const fs::path& rel) { return files_identical(a / rel, b / rel); });
}

}  // namespace ltc::testing
