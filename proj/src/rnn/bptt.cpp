// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/rnn/bptt.hpp"

#include <cmath>
#include <string>

#include "cwtrnn/core/error.hpp"

namespace cwtrnn::rnn {

namespace {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
Mat<S> load_matrix(const nn::Tensor& t) {
  return Eigen::Map<const RowMajorF>(t.ptr(), static_cast<Eigen::Index>(t.dim(0)),
                                     static_cast<Eigen::Index>(t.dim(1)))
      .template cast<S>();
}

template <class S>
Vec<S> load_vector(const nn::Tensor& t) {
  return Eigen::Map<const Eigen::VectorXf>(t.ptr(), static_cast<Eigen::Index>(t.numel())).template cast<S>();
}

template <class S>
void store_matrix(const Mat<S>& m, nn::Tensor& t) {
  t = nn::Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<RowMajorF>(t.ptr(), m.rows(), m.cols()) = m.template cast<float>();
}

template <class S>
void store_vector(const Vec<S>& v, nn::Tensor& t) {
  t = nn::Tensor({static_cast<std::size_t>(v.size())});
  Eigen::Map<Eigen::VectorXf>(t.ptr(), v.size()) = v.template cast<float>();
}

template <class S>
Mat<S> leaky(const Mat<S>& u, S slope) {
  return u.unaryExpr([slope](S v) { return v > S(0) ? v : v * slope; });
}

template <class S>
Mat<S> leaky_grad(const Mat<S>& u, S slope) {
  return u.unaryExpr([slope](S v) { return v > S(0) ? S(1) : slope; });
}

}  // namespace

template <class S>
ParamsT<S> to_params(const RnnModel& m) {
  m.check_shapes();
  ParamsT<S> p;
  p.w1 = load_matrix<S>(m.w1);
  p.w2 = load_matrix<S>(m.w2);
  p.w3 = load_matrix<S>(m.w3);
  p.w4 = load_matrix<S>(m.w4);
  p.b1 = load_vector<S>(m.b1);
  p.b2 = load_vector<S>(m.b2);
  p.b3 = load_vector<S>(m.b3);
  p.b4 = load_vector<S>(m.b4);
  p.gain = load_vector<S>(m.ln_gain);
  p.bias = load_vector<S>(m.ln_bias);
  return p;
}

template <class S>
void from_params(const ParamsT<S>& p, RnnModel& m) {
  store_matrix<S>(p.w1, m.w1);
  store_matrix<S>(p.w2, m.w2);
  store_matrix<S>(p.w3, m.w3);
  store_matrix<S>(p.w4, m.w4);
  store_vector<S>(p.b1, m.b1);
  store_vector<S>(p.b2, m.b2);
  store_vector<S>(p.b3, m.b3);
  store_vector<S>(p.b4, m.b4);
  store_vector<S>(p.gain, m.ln_gain);
  store_vector<S>(p.bias, m.ln_bias);
  m.check_shapes();
}

template <class S>
S loss_and_gradients(const ParamsT<S>& p, const RnnConfig& c, const BatchView& batch, LossMode mode,
                     ParamsT<S>* grads) {
  const FeatureSet& data = *batch.data;
  const std::size_t F = c.freq_count, W = c.input_width(), H = c.hidden, N = c.classes;
  const std::size_t T = data.timesteps;
  const auto B = static_cast<Eigen::Index>(batch.indices.size());
  if (data.width != W) {
    throw ShapeError("features have width " + std::to_string(data.width) + ", model expects " + std::to_string(W));
  }
  if (T == 0 || B == 0) throw InvalidArgument("empty batch");
  const auto Fi = static_cast<Eigen::Index>(F), Hi = static_cast<Eigen::Index>(H);
  const S slope = static_cast<S>(c.leaky_slope);
  const S eps = static_cast<S>(nn::kLayerNormEps);

  std::vector<std::uint16_t> labels(batch.indices.size());
  for (std::size_t b = 0; b < labels.size(); ++b) {
    labels[b] = data.labels[batch.indices[b]];
    if (labels[b] >= N) throw InvalidArgument("label " + std::to_string(labels[b]) + " out of range");
  }

  struct Step {
    Mat<S> n, z, u1, a1, mask, h, u3, a3, prob;
    Eigen::Matrix<S, 1, Eigen::Dynamic> rstd;
  };
  std::vector<Step> steps(T);
  Mat<S> h = Mat<S>::Zero(Hi, B);
  Mat<S> x(static_cast<Eigen::Index>(W), B);
  S loss = 0;
  for (std::size_t t = 0; t < T; ++t) {
    Step& s = steps[t];
    for (Eigen::Index b = 0; b < B; ++b) {
      const float* row = data.example(batch.indices[static_cast<std::size_t>(b)]) + t * W;
      x.col(b) = Eigen::Map<const Eigen::VectorXf>(row, static_cast<Eigen::Index>(W)).template cast<S>();
    }
    const auto A = x.topRows(Fi);
    const Eigen::Matrix<S, 1, Eigen::Dynamic> mean = A.colwise().mean();
    const Mat<S> centered = A.rowwise() - mean;
    const Eigen::Matrix<S, 1, Eigen::Dynamic> var = centered.colwise().squaredNorm() / static_cast<S>(F);
    s.rstd = (var.array() + eps).sqrt().inverse().matrix();
    s.n = centered * s.rstd.asDiagonal();
    s.z.resize(static_cast<Eigen::Index>(W + H), B);
    s.z.topRows(Fi) = (s.n.array().colwise() * p.gain.array()).colwise() + p.bias.array();
    s.z.middleRows(Fi, Fi) = x.bottomRows(Fi);
    s.z.bottomRows(Hi) = h;

    s.u1 = (p.w1 * s.z).colwise() + p.b1;
    s.a1 = leaky<S>(s.u1, slope);
    if (batch.masks) {
      s.mask.resize(Hi, B);
      for (Eigen::Index b = 0; b < B; ++b) {
        const float* m = batch.masks + (static_cast<std::size_t>(b) * T + t) * H;
        s.mask.col(b) = Eigen::Map<const Eigen::VectorXf>(m, Hi).template cast<S>();
      }
      s.a1.array() *= s.mask.array();
    }
    s.h = (p.w2 * s.a1).colwise() + p.b2;
    s.u3 = (p.w3 * s.h).colwise() + p.b3;
    s.a3 = leaky<S>(s.u3, slope);
    Mat<S> o = (p.w4 * s.a3).colwise() + p.b4;
    const Eigen::Matrix<S, 1, Eigen::Dynamic> top = o.colwise().maxCoeff();
    o.rowwise() -= top;
    const Eigen::Matrix<S, 1, Eigen::Dynamic> lse = o.array().exp().colwise().sum().log().matrix();
    o.rowwise() -= lse;
    s.prob = o.array().exp().matrix();
    const bool counted = mode == LossMode::kAllTimesteps || t + 1 == T;
    if (counted) {
      const S weight = mode == LossMode::kAllTimesteps ? S(1) / static_cast<S>(T) : S(1);
      for (Eigen::Index b = 0; b < B; ++b) loss -= weight * o(labels[static_cast<std::size_t>(b)], b);
    }
    h = s.h;
  }
  if (!grads) return loss;

  ParamsT<S>& g = *grads;
  g = p.zeros_like();
  Mat<S> dh_next = Mat<S>::Zero(Hi, B);
  for (std::size_t ti = T; ti-- > 0;) {
    const Step& s = steps[ti];
    Mat<S> d_o;
    if (mode == LossMode::kAllTimesteps || ti + 1 == T) {
      d_o = s.prob;
      for (Eigen::Index b = 0; b < B; ++b) d_o(labels[static_cast<std::size_t>(b)], b) -= S(1);
      if (mode == LossMode::kAllTimesteps) d_o /= static_cast<S>(T);
      g.w4.noalias() += d_o * s.a3.transpose();
      g.b4 += d_o.rowwise().sum();
    } else {
      d_o = Mat<S>::Zero(static_cast<Eigen::Index>(N), B);
    }
    const Mat<S> du3 = ((p.w4.transpose() * d_o).array() * leaky_grad<S>(s.u3, slope).array()).matrix();
    g.w3.noalias() += du3 * s.h.transpose();
    g.b3 += du3.rowwise().sum();
    const Mat<S> dh = p.w3.transpose() * du3 + dh_next;
    g.w2.noalias() += dh * s.a1.transpose();
    g.b2 += dh.rowwise().sum();
    Mat<S> da1 = p.w2.transpose() * dh;
    if (batch.masks) da1.array() *= s.mask.array();
    const Mat<S> du1 = (da1.array() * leaky_grad<S>(s.u1, slope).array()).matrix();
    g.w1.noalias() += du1 * s.z.transpose();
    g.b1 += du1.rowwise().sum();
    const Mat<S> dz = p.w1.transpose() * du1;
    dh_next = dz.bottomRows(Hi);
    const auto dxn = dz.topRows(Fi);
    g.gain += (dxn.array() * s.n.array()).matrix().rowwise().sum();
    g.bias += dxn.rowwise().sum();
  }
  return loss;
}

template ParamsT<float> to_params<float>(const RnnModel&);
template ParamsT<double> to_params<double>(const RnnModel&);
template void from_params<float>(const ParamsT<float>&, RnnModel&);
template void from_params<double>(const ParamsT<double>&, RnnModel&);
template float loss_and_gradients<float>(const ParamsT<float>&, const RnnConfig&, const BatchView&, LossMode,
                                         ParamsT<float>*);
template double loss_and_gradients<double>(const ParamsT<double>&, const RnnConfig&, const BatchView&, LossMode,
                                           ParamsT<double>*);

}  // namespace cwtrnn::rnn
