#include <cmath>

#include "ltc/error.hpp"
#include "ltc/nn.hpp"

namespace ltc::nn {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::CausalDilatedConv1D: return "CausalDilatedConv1D";
    case LayerKind::MaxPool1D: return "MaxPool1D";
    case LayerKind::BiLSTM: return "BiLSTM";
    case LayerKind::AdditiveAttention: return "AdditiveAttention";
    case LayerKind::TimeDistributedDense: return "TimeDistributedDense";
    case LayerKind::Upsample1D: return "Upsample1D";
    case LayerKind::TransposedConv1D: return "TransposedConv1D";
    case LayerKind::Activation: return "Activation";
  }
  return "?";
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::LeakyRelu: return "leaky_relu";
    case ActivationKind::Logistic: return "logistic";
    case ActivationKind::Tanh: return "tanh";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& name) {
  for (auto k : {LayerKind::CausalDilatedConv1D, LayerKind::MaxPool1D, LayerKind::BiLSTM,
                 LayerKind::AdditiveAttention, LayerKind::TimeDistributedDense, LayerKind::Upsample1D,
                 LayerKind::TransposedConv1D, LayerKind::Activation})
    if (to_string(k) == name) return k;
  fail(Errc::InvalidArgument, "unknown layer kind '" + name + "'");
}

ActivationKind parse_activation(const std::string& name) {
  for (auto k : {ActivationKind::Identity, ActivationKind::LeakyRelu, ActivationKind::Logistic, ActivationKind::Tanh})
    if (to_string(k) == name) return k;
  fail(Errc::InvalidArgument, "unknown activation '" + name + "'");
}

LayerSpec LayerSpec::causal_conv(std::string name, Index in, Index out, Index kernel, Index dilation) {
  require(in >= 1 && out >= 1 && kernel >= 1 && dilation >= 1, Errc::InvalidArgument, "bad conv spec");
  LayerSpec s;
  s.kind = LayerKind::CausalDilatedConv1D;
  s.name = std::move(name);
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  s.dilation = dilation;
  return s;
}

LayerSpec LayerSpec::max_pool(std::string name, Index channels, Index pool) {
  require(pool >= 1, Errc::InvalidArgument, "bad pool size");
  LayerSpec s;
  s.kind = LayerKind::MaxPool1D;
  s.name = std::move(name);
  s.in_channels = s.out_channels = channels;
  s.pool = pool;
  return s;
}

LayerSpec LayerSpec::bilstm(std::string name, Index in, Index hidden) {
  require(in >= 1 && hidden >= 1, Errc::InvalidArgument, "bad BiLSTM spec");
  LayerSpec s;
  s.kind = LayerKind::BiLSTM;
  s.name = std::move(name);
  s.in_channels = in;
  s.hidden = hidden;
  s.out_channels = 2 * hidden;
  return s;
}

LayerSpec LayerSpec::attention(std::string name, Index channels, Index score_width) {
  require(channels >= 1 && score_width >= 1, Errc::InvalidArgument, "bad attention spec");
  LayerSpec s;
  s.kind = LayerKind::AdditiveAttention;
  s.name = std::move(name);
  s.in_channels = s.out_channels = channels;
  s.hidden = score_width;
  return s;
}

LayerSpec LayerSpec::dense(std::string name, Index in, Index out) {
  require(in >= 1 && out >= 1, Errc::InvalidArgument, "bad dense spec");
  LayerSpec s;
  s.kind = LayerKind::TimeDistributedDense;
  s.name = std::move(name);
  s.in_channels = in;
  s.out_channels = out;
  return s;
}

LayerSpec LayerSpec::upsample(std::string name, Index channels, Index factor) {
  require(factor >= 1, Errc::InvalidArgument, "bad upsample factor");
  LayerSpec s;
  s.kind = LayerKind::Upsample1D;
  s.name = std::move(name);
  s.in_channels = s.out_channels = channels;
  s.pool = factor;
  return s;
}

LayerSpec LayerSpec::transposed_conv(std::string name, Index in, Index out, Index kernel) {
  require(in >= 1 && out >= 1 && kernel >= 1, Errc::InvalidArgument, "bad transposed conv spec");
  LayerSpec s;
  s.kind = LayerKind::TransposedConv1D;
  s.name = std::move(name);
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  return s;
}

LayerSpec LayerSpec::act(std::string name, Index channels, ActivationKind kind) {
  LayerSpec s;
  s.kind = LayerKind::Activation;
  s.name = std::move(name);
  s.in_channels = s.out_channels = channels;
  s.activation = kind;
  return s;
}

Index LayerSpec::output_channels() const { return out_channels; }

Index LayerSpec::output_time(Index input_time) const {
  switch (kind) {
    case LayerKind::MaxPool1D: return input_time / pool;
    case LayerKind::Upsample1D: return input_time * pool;
    default: return input_time;
  }
}

Index LayerSpec::param_count() const {
  switch (kind) {
    case LayerKind::CausalDilatedConv1D:
    case LayerKind::TransposedConv1D:
    case LayerKind::TimeDistributedDense: return 2;
    case LayerKind::BiLSTM: return 6;
    case LayerKind::AdditiveAttention: return 3;
    default: return 0;
  }
}

namespace {

using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

// Rows {b * time + t : b} of a batch-major matrix, i.e. one timestep across
// the whole batch.
StridedMap step_rows(RowMatrix& m, Index time, Index t) {
  return {m.data() + t * m.cols(), m.rows() / time, m.cols(), Eigen::OuterStride<>(time * m.cols())};
}
ConstStridedMap step_rows(const RowMatrix& m, Index time, Index t) {
  return {m.data() + t * m.cols(), m.rows() / time, m.cols(), Eigen::OuterStride<>(time * m.cols())};
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  return 1.0 / (1.0 + (-x).exp());
}

void check_finite(const RowMatrix& m, const LayerSpec& spec, const char* stage) {
  if (!m.allFinite()) fail(Errc::NonFiniteValue, spec.name + " produced a non-finite value in " + stage);
}

void check_input(const LayerSpec& spec, const Tensor& x) {
  require(x.data.rows() == x.batch * x.time && x.data.cols() == x.channels && x.batch >= 1 && x.time >= 1,
          Errc::ShapeMismatch, spec.name + ": malformed tensor");
  require(spec.in_channels == 0 || x.channels == spec.in_channels, Errc::ShapeMismatch,
          spec.name + ": expected " + std::to_string(spec.in_channels) + " channels, got " +
              std::to_string(x.channels));
}

// Column block k of the result holds x[t + offsets[k]] (zero outside [0, T)).
RowMatrix im2col(const Tensor& x, const std::vector<Index>& offsets) {
  const Index B = x.batch, T = x.time, C = x.channels, K = static_cast<Index>(offsets.size());
  RowMatrix cols = RowMatrix::Zero(B * T, K * C);
  for (Index b = 0; b < B; ++b)
    for (Index k = 0; k < K; ++k) {
      const Index off = offsets[static_cast<std::size_t>(k)];
      const Index t0 = std::max<Index>(0, -off);
      const Index t1 = std::min<Index>(T, T - off);
      if (t1 > t0)
        cols.block(b * T + t0, k * C, t1 - t0, C) = x.data.middleRows(b * T + t0 + off, t1 - t0);
    }
  return cols;
}

RowMatrix col2im(const RowMatrix& dcols, Index B, Index T, Index C, const std::vector<Index>& offsets) {
  RowMatrix dx = RowMatrix::Zero(B * T, C);
  const Index K = static_cast<Index>(offsets.size());
  for (Index b = 0; b < B; ++b)
    for (Index k = 0; k < K; ++k) {
      const Index off = offsets[static_cast<std::size_t>(k)];
      const Index t0 = std::max<Index>(0, -off);
      const Index t1 = std::min<Index>(T, T - off);
      if (t1 > t0) dx.middleRows(b * T + t0 + off, t1 - t0) += dcols.block(b * T + t0, k * C, t1 - t0, C);
    }
  return dx;
}

std::vector<Index> conv_offsets(const LayerSpec& spec) {
  std::vector<Index> off(static_cast<std::size_t>(spec.kernel));
  if (spec.kind == LayerKind::CausalDilatedConv1D) {
    // Tap k looks (K - 1 - k) * dilation steps into the past.
    for (Index k = 0; k < spec.kernel; ++k) off[static_cast<std::size_t>(k)] = -(spec.kernel - 1 - k) * spec.dilation;
  } else {
    // Stride-1 transposed convolution: input step s scatters to outputs
    // s + k - pad, equivalently output t gathers input t + pad - k.
    const Index pad = (spec.kernel - 1) / 2;
    for (Index k = 0; k < spec.kernel; ++k) off[static_cast<std::size_t>(k)] = pad - k;
  }
  return off;
}

RowMatrix apply_activation(ActivationKind kind, const RowMatrix& x) {
  switch (kind) {
    case ActivationKind::Identity: return x;
    case ActivationKind::LeakyRelu: return (x.array() > 0.0).select(x, 0.01 * x);
    case ActivationKind::Logistic: return sigmoid(x.array()).matrix();
    case ActivationKind::Tanh: return x.array().tanh().matrix();
  }
  return x;
}

RowMatrix activation_grad(ActivationKind kind, const RowMatrix& x, const RowMatrix& dy) {
  switch (kind) {
    case ActivationKind::Identity: return dy;
    case ActivationKind::LeakyRelu: return (x.array() > 0.0).select(dy, 0.01 * dy);
    case ActivationKind::Logistic: {
      const RowMatrix s = sigmoid(x.array()).matrix();
      return (dy.array() * s.array() * (1.0 - s.array())).matrix();
    }
    case ActivationKind::Tanh: {
      const RowMatrix t = x.array().tanh().matrix();
      return (dy.array() * (1.0 - t.array().square())).matrix();
    }
  }
  return dy;
}

struct LstmTrace {
  RowMatrix gates;   // activated i, f, g, o per row
  RowMatrix cells;   // c_t
  RowMatrix hidden;  // h_t
};

LstmTrace lstm_forward(const RowMatrix& x, Index T, const Matrix& Wx, const Matrix& Wh, const Matrix& bias,
                       bool reverse) {
  const Index BT = x.rows(), B = BT / T, H = Wh.rows();
  LstmTrace tr;
  tr.gates = x * Wx;
  tr.gates.rowwise() += bias.row(0);
  tr.cells.resize(BT, H);
  tr.hidden.resize(BT, H);
  RowMatrix h = RowMatrix::Zero(B, H), c = RowMatrix::Zero(B, H);
  RowMatrix a(B, 4 * H);
  for (Index s = 0; s < T; ++s) {
    const Index t = reverse ? T - 1 - s : s;
    auto g = step_rows(tr.gates, T, t);
    a.noalias() = g;
    a.noalias() += h * Wh;
    a.leftCols(2 * H) = sigmoid(a.leftCols(2 * H).array()).matrix();
    a.middleCols(2 * H, H) = a.middleCols(2 * H, H).array().tanh().matrix();
    a.rightCols(H) = sigmoid(a.rightCols(H).array()).matrix();
    c = (a.middleCols(H, H).array() * c.array() + a.leftCols(H).array() * a.middleCols(2 * H, H).array()).matrix();
    h = (a.rightCols(H).array() * c.array().tanh()).matrix();
    g = a;
    step_rows(tr.cells, T, t) = c;
    step_rows(tr.hidden, T, t) = h;
  }
  return tr;
}

void lstm_backward(const RowMatrix& x, Index T, const Matrix& Wx, const Matrix& Wh, const LstmTrace& tr,
                   bool reverse, const RowMatrix& dh_out, Matrix& dWx, Matrix& dWh, Matrix& db, RowMatrix& dx) {
  const Index BT = x.rows(), B = BT / T, H = Wh.rows();
  RowMatrix dA(BT, 4 * H);
  RowMatrix dh_next = RowMatrix::Zero(B, H), dc_next = RowMatrix::Zero(B, H);
  RowMatrix dh(B, H), dc(B, H), tc(B, H), c_prev(B, H), da(B, 4 * H);
  for (Index s = T - 1; s >= 0; --s) {
    const Index t = reverse ? T - 1 - s : s;
    const Index tp = reverse ? t + 1 : t - 1;
    const auto g = step_rows(tr.gates, T, t);
    const auto i = g.leftCols(H).array();
    const auto f = g.middleCols(H, H).array();
    const auto gg = g.middleCols(2 * H, H).array();
    const auto o = g.rightCols(H).array();
    if (s > 0)
      c_prev = step_rows(tr.cells, T, tp);
    else
      c_prev.setZero();
    dh = step_rows(dh_out, T, t) + dh_next;
    tc = step_rows(tr.cells, T, t).array().tanh().matrix();
    dc = (dh.array() * o * (1.0 - tc.array().square()) + dc_next.array()).matrix();
    da.leftCols(H) = (dc.array() * gg * i * (1.0 - i)).matrix();
    da.middleCols(H, H) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
    da.middleCols(2 * H, H) = (dc.array() * i * (1.0 - gg.square())).matrix();
    da.rightCols(H) = (dh.array() * tc.array() * o * (1.0 - o)).matrix();
    dc_next = (dc.array() * f).matrix();
    if (s > 0) dWh.noalias() += step_rows(tr.hidden, T, tp).transpose() * da;
    dh_next.noalias() = da * Wh.transpose();
    step_rows(dA, T, t) = da;
  }
  dWx.noalias() += x.transpose() * dA;
  db += dA.colwise().sum();
  dx.noalias() += dA * Wx.transpose();
}

struct AttentionTrace {
  RowMatrix u;        // tanh(x W + b)
  Eigen::VectorXd a;  // softmax weights per row
};

AttentionTrace attention_scores(const RowMatrix& x, Index B, Index T, const Matrix& W, const Matrix& bias,
                                const Matrix& v) {
  AttentionTrace tr;
  tr.u = x * W;
  tr.u.rowwise() += bias.row(0);
  tr.u = tr.u.array().tanh().matrix();
  const Eigen::VectorXd s = tr.u * v.col(0);
  tr.a.resize(B * T);
  for (Index b = 0; b < B; ++b) {
    const auto sb = s.segment(b * T, T);
    const Eigen::ArrayXd e = (sb.array() - sb.maxCoeff()).exp();
    tr.a.segment(b * T, T) = (e / e.sum()).matrix();
  }
  return tr;
}

}  // namespace

Vector attention_weights(const LayerSpec& spec, const ParamStore& params, const Tensor& x) {
  require(spec.kind == LayerKind::AdditiveAttention, Errc::InvalidArgument, "not an attention layer");
  check_input(spec, x);
  const Index p = spec.first_param;
  return attention_scores(x.data, x.batch, x.time, params.value(p), params.value(p + 1), params.value(p + 2)).a;
}

Tensor layer_forward(const LayerSpec& spec, const ParamStore& params, const Tensor& x, LayerCache& cache) {
  check_input(spec, x);
  require(spec.param_count() == 0 || (spec.first_param >= 0 && spec.first_param + spec.param_count() <= params.size()),
          Errc::ShapeMismatch, spec.name + ": parameters not registered");
  const Index B = x.batch, T = x.time, C = x.channels, p = spec.first_param;
  cache = LayerCache{};
  cache.batch = B;
  cache.time = T;
  Tensor y;
  switch (spec.kind) {
    case LayerKind::CausalDilatedConv1D:
    case LayerKind::TransposedConv1D: {
      RowMatrix cols = im2col(x, conv_offsets(spec));
      RowMatrix out = cols * params.value(p);
      out.rowwise() += params.value(p + 1).row(0);
      cache.mats.push_back(std::move(cols));
      y = Tensor(B, T, std::move(out));
      break;
    }
    case LayerKind::MaxPool1D: {
      const Index P = spec.pool;
      require(T % P == 0, Errc::ShapeMismatch, spec.name + ": time length not divisible by pool size");
      const Index To = T / P;
      y = Tensor(B, To, C);
      cache.indices.resize(static_cast<std::size_t>(B * To * C));
      for (Index b = 0; b < B; ++b)
        for (Index t = 0; t < To; ++t)
          for (Index c = 0; c < C; ++c) {
            Index best = b * T + t * P;
            for (Index j = 1; j < P; ++j)
              if (x.data(b * T + t * P + j, c) > x.data(best, c)) best = b * T + t * P + j;
            y.data(b * To + t, c) = x.data(best, c);
            cache.indices[static_cast<std::size_t>((b * To + t) * C + c)] = best;
          }
      break;
    }
    case LayerKind::BiLSTM: {
      const Index H = spec.hidden;
      LstmTrace fwd = lstm_forward(x.data, T, params.value(p), params.value(p + 1), params.value(p + 2), false);
      LstmTrace bwd = lstm_forward(x.data, T, params.value(p + 3), params.value(p + 4), params.value(p + 5), true);
      RowMatrix out(B * T, 2 * H);
      out.leftCols(H) = fwd.hidden;
      out.rightCols(H) = bwd.hidden;
      cache.mats = {x.data,           std::move(fwd.gates), std::move(fwd.cells), std::move(fwd.hidden),
                    std::move(bwd.gates), std::move(bwd.cells), std::move(bwd.hidden)};
      y = Tensor(B, T, std::move(out));
      break;
    }
    case LayerKind::AdditiveAttention: {
      AttentionTrace tr = attention_scores(x.data, B, T, params.value(p), params.value(p + 1), params.value(p + 2));
      // Scaled by T so uniform weights pass the sequence through unchanged.
      RowMatrix out = (x.data.array().colwise() * (static_cast<double>(T) * tr.a.array())).matrix();
      cache.mats = {x.data, std::move(tr.u), RowMatrix(tr.a)};
      y = Tensor(B, T, std::move(out));
      break;
    }
    case LayerKind::TimeDistributedDense: {
      RowMatrix out = x.data * params.value(p);
      out.rowwise() += params.value(p + 1).row(0);
      cache.mats.push_back(x.data);
      y = Tensor(B, T, std::move(out));
      break;
    }
    case LayerKind::Upsample1D: {
      const Index P = spec.pool;
      y = Tensor(B, T * P, C);
      for (Index r = 0; r < B * T; ++r)
        for (Index j = 0; j < P; ++j) y.data.row(r * P + j) = x.data.row(r);
      break;
    }
    case LayerKind::Activation: {
      y = Tensor(B, T, apply_activation(spec.activation, x.data));
      cache.mats.push_back(x.data);
      break;
    }
  }
  check_finite(y.data, spec, "forward");
  cache.valid = true;
  return y;
}

Tensor layer_backward(const LayerSpec& spec, const ParamStore& params, LayerCache& cache, const Tensor& dy,
                      GradStore& grads) {
  require(cache.valid, Errc::StaleCache, spec.name + ": backward without a matching forward");
  const Index B = cache.batch, T = cache.time, p = spec.first_param;
  const Index To = spec.output_time(T);
  require(dy.batch == B && dy.time == To && dy.channels == spec.out_channels &&
              dy.data.rows() == B * To && dy.data.cols() == spec.out_channels,
          Errc::ShapeMismatch, spec.name + ": upstream gradient has the wrong shape");
  require(spec.param_count() == 0 || static_cast<Index>(grads.size()) >= p + spec.param_count(),
          Errc::ShapeMismatch, spec.name + ": gradient store too small");
  auto grad = [&](Index k) -> Matrix& { return grads[static_cast<std::size_t>(p + k)]; };
  Tensor dx;
  switch (spec.kind) {
    case LayerKind::CausalDilatedConv1D:
    case LayerKind::TransposedConv1D: {
      const RowMatrix& cols = cache.mats[0];
      grad(0).noalias() += cols.transpose() * dy.data;
      grad(1) += dy.data.colwise().sum();
      RowMatrix dcols = dy.data * params.value(p).transpose();
      dx = Tensor(B, T, col2im(dcols, B, T, spec.in_channels, conv_offsets(spec)));
      break;
    }
    case LayerKind::MaxPool1D: {
      const Index C = spec.in_channels;
      dx = Tensor(B, T, C);
      for (Index r = 0; r < B * To; ++r)
        for (Index c = 0; c < C; ++c)
          dx.data(cache.indices[static_cast<std::size_t>(r * C + c)], c) += dy.data(r, c);
      break;
    }
    case LayerKind::BiLSTM: {
      const Index H = spec.hidden;
      const RowMatrix& x = cache.mats[0];
      RowMatrix dxm = RowMatrix::Zero(x.rows(), x.cols());
      const RowMatrix dh_f = dy.data.leftCols(H);
      const RowMatrix dh_b = dy.data.rightCols(H);
      LstmTrace fwd{cache.mats[1], cache.mats[2], cache.mats[3]};
      LstmTrace bwd{cache.mats[4], cache.mats[5], cache.mats[6]};
      lstm_backward(x, T, params.value(p), params.value(p + 1), fwd, false, dh_f, grad(0), grad(1), grad(2), dxm);
      lstm_backward(x, T, params.value(p + 3), params.value(p + 4), bwd, true, dh_b, grad(3), grad(4), grad(5), dxm);
      dx = Tensor(B, T, std::move(dxm));
      break;
    }
    case LayerKind::AdditiveAttention: {
      const RowMatrix& x = cache.mats[0];
      const RowMatrix& u = cache.mats[1];
      const Eigen::VectorXd a = cache.mats[2].col(0);
      const double scale = static_cast<double>(T);
      const Eigen::VectorXd da = scale * (dy.data.array() * x.array()).rowwise().sum().matrix();
      RowMatrix dxm = (dy.data.array().colwise() * (scale * a.array())).matrix();
      Eigen::VectorXd ds(B * T);
      for (Index b = 0; b < B; ++b) {
        const auto ab = a.segment(b * T, T);
        const auto dab = da.segment(b * T, T);
        ds.segment(b * T, T) = (ab.array() * (dab.array() - ab.dot(dab))).matrix();
      }
      const Matrix& W = params.value(p);
      const Matrix& v = params.value(p + 2);
      grad(2).noalias() += u.transpose() * ds;
      const RowMatrix dpre = ((ds * v.col(0).transpose()).array() * (1.0 - u.array().square())).matrix();
      grad(0).noalias() += x.transpose() * dpre;
      grad(1) += dpre.colwise().sum();
      dxm.noalias() += dpre * W.transpose();
      dx = Tensor(B, T, std::move(dxm));
      break;
    }
    case LayerKind::TimeDistributedDense: {
      const RowMatrix& x = cache.mats[0];
      grad(0).noalias() += x.transpose() * dy.data;
      grad(1) += dy.data.colwise().sum();
      dx = Tensor(B, T, RowMatrix(dy.data * params.value(p).transpose()));
      break;
    }
    case LayerKind::Upsample1D: {
      const Index P = spec.pool;
      dx = Tensor(B, T, spec.in_channels);
      for (Index r = 0; r < B * T; ++r)
        for (Index j = 0; j < P; ++j) dx.data.row(r) += dy.data.row(r * P + j);
      break;
    }
    case LayerKind::Activation: {
      dx = Tensor(B, T, activation_grad(spec.activation, cache.mats[0], dy.data));
      break;
    }
  }
  check_finite(dx.data, spec, "backward");
  cache.valid = false;
  return dx;
}

Tensor forward(std::span<const LayerSpec> layers, const ParamStore& params, const Tensor& x, Workspace& ws) {
  ws.caches.resize(layers.size());
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) h = layer_forward(layers[i], params, h, ws.caches[i]);
  return h;
}

Tensor infer(std::span<const LayerSpec> layers, const ParamStore& params, const Tensor& x) {
  LayerCache scratch;
  Tensor h = x;
  for (const auto& layer : layers) h = layer_forward(layer, params, h, scratch);
  return h;
}

Tensor backward(std::span<const LayerSpec> layers, const ParamStore& params, Workspace& ws, const Tensor& dy,
                GradStore& grads) {
  require(ws.caches.size() == layers.size(), Errc::StaleCache, "workspace does not match the layer stack");
  Tensor g = dy;
  for (std::size_t i = layers.size(); i-- > 0;) g = layer_backward(layers[i], params, ws.caches[i], g, grads);
  return g;
}

}  // namespace ltc::nn
