#include <cmath>
#include <random>

#include "ltc/error.hpp"
#include "ltc/nn.hpp"

namespace ltc::nn {

Index ParamStore::add(std::string name, Index rows, Index cols) {
  Param p;
  p.name = std::move(name);
  p.value = Matrix::Zero(rows, cols);
  p.m = Matrix::Zero(rows, cols);
  p.v = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return size() - 1;
}

Index ParamStore::find(const std::string& name) const {
  for (Index i = 0; i < size(); ++i)
    if ((*this)[i].name == name) return i;
  return -1;
}

Index ParamStore::numel() const {
  Index n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool ParamStore::values_equal(const ParamStore& other) const {
  if (size() != other.size()) return false;
  for (Index i = 0; i < size(); ++i) {
    const auto& a = (*this)[i].value;
    const auto& b = other[i].value;
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    // Bitwise equality: NaN never appears (forward/backward reject it).
    if ((a.array() != b.array()).any()) return false;
  }
  return true;
}

GradStore zero_grads(const ParamStore& store) {
  GradStore g;
  g.reserve(static_cast<std::size_t>(store.size()));
  for (const auto& p : store) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  return g;
}

void adam_step(ParamStore& params, const GradStore& grads, double lr, const AdamConfig& cfg) {
  require(static_cast<Index>(grads.size()) == params.size(), Errc::ShapeMismatch, "gradient count != parameter count");
  for (Index i = 0; i < params.size(); ++i) {
    const auto& g = grads[static_cast<std::size_t>(i)];
    require(g.rows() == params.value(i).rows() && g.cols() == params.value(i).cols(), Errc::ShapeMismatch,
            "gradient shape mismatch for " + params[i].name);
  }
  params.set_step(params.step() + 1);
  const double t = static_cast<double>(params.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (Index i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto& g = grads[static_cast<std::size_t>(i)];
    p.m = cfg.beta1 * p.m + (1.0 - cfg.beta1) * g;
    p.v = cfg.beta2 * p.v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    p.value.array() -= lr * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + cfg.eps);
  }
}

namespace {

void glorot(Matrix& w, Index fan_in, Index fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index c = 0; c < w.cols(); ++c)
    for (Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
}

}  // namespace

ParamStore init_params(std::span<LayerSpec> specs, std::uint64_t seed, const std::string& prefix) {
  ParamStore store;
  std::mt19937_64 rng(seed);
  for (auto& spec : specs) {
    const std::string base = prefix + spec.name + ".";
    spec.first_param = spec.param_count() > 0 ? store.size() : -1;
    switch (spec.kind) {
      case LayerKind::CausalDilatedConv1D:
      case LayerKind::TransposedConv1D: {
        const Index K = spec.kernel, in = spec.in_channels, out = spec.out_channels;
        glorot(store.value(store.add(base + "W", K * in, out)), K * in, K * out, rng);
        store.add(base + "b", 1, out);
        break;
      }
      case LayerKind::TimeDistributedDense: {
        glorot(store.value(store.add(base + "W", spec.in_channels, spec.out_channels)), spec.in_channels,
               spec.out_channels, rng);
        store.add(base + "b", 1, spec.out_channels);
        break;
      }
      case LayerKind::BiLSTM: {
        const Index in = spec.in_channels, H = spec.hidden;
        for (const char* dir : {"fwd.", "bwd."}) {
          glorot(store.value(store.add(base + dir + "Wx", in, 4 * H)), in, 4 * H, rng);
          glorot(store.value(store.add(base + dir + "Wh", H, 4 * H)), H, 4 * H, rng);
          const Index b = store.add(base + dir + "b", 1, 4 * H);
          store.value(b).middleCols(H, H).setOnes();
        }
        break;
      }
      case LayerKind::AdditiveAttention: {
        const Index C = spec.in_channels, A = spec.hidden;
        glorot(store.value(store.add(base + "W", C, A)), C, A, rng);
        store.add(base + "b", 1, A);
        glorot(store.value(store.add(base + "v", A, 1)), A, 1, rng);
        break;
      }
      case LayerKind::MaxPool1D:
      case LayerKind::Upsample1D:
      case LayerKind::Activation:
        break;
    }
  }
  return store;
}

}  // namespace ltc::nn
