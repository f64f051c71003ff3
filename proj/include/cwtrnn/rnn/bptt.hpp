// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cwtrnn/rnn/features.hpp"
#include "cwtrnn/rnn/model.hpp"

namespace cwtrnn::rnn {

/// RNN parameters as Eigen matrices in scalar type S. float drives training,
/// double drives the finite-difference gradient check.
template <class S>
struct ParamsT {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  Mat w1, w2, w3, w4;
  Vec b1, b2, b3, b4, gain, bias;

  // Same order as RnnModel::parameters().
  std::vector<std::pair<S*, std::size_t>> blocks() {
    return {{w1.data(), std::size_t(w1.size())}, {b1.data(), std::size_t(b1.size())},
            {w2.data(), std::size_t(w2.size())}, {b2.data(), std::size_t(b2.size())},
            {w3.data(), std::size_t(w3.size())}, {b3.data(), std::size_t(b3.size())},
            {w4.data(), std::size_t(w4.size())}, {b4.data(), std::size_t(b4.size())},
            {gain.data(), std::size_t(gain.size())}, {bias.data(), std::size_t(bias.size())}};
  }
  ParamsT zeros_like() const {
    ParamsT z;
    z.w1 = Mat::Zero(w1.rows(), w1.cols());
    z.w2 = Mat::Zero(w2.rows(), w2.cols());
    z.w3 = Mat::Zero(w3.rows(), w3.cols());
    z.w4 = Mat::Zero(w4.rows(), w4.cols());
    z.b1 = Vec::Zero(b1.size());
    z.b2 = Vec::Zero(b2.size());
    z.b3 = Vec::Zero(b3.size());
    z.b4 = Vec::Zero(b4.size());
    z.gain = Vec::Zero(gain.size());
    z.bias = Vec::Zero(bias.size());
    return z;
  }
};

template <class S>
ParamsT<S> to_params(const RnnModel& model);
template <class S>
void from_params(const ParamsT<S>& params, RnnModel& model);

/// A batch drawn from a FeatureSet by index. `masks`, when non-null, holds
/// indices.size() x T x H dropout multipliers (0 or 1/(1-p)) laid out per
/// example in timestep order, the order rnn_forward draws them in.
struct BatchView {
  const FeatureSet* data = nullptr;
  std::span<const std::size_t> indices;
  const float* masks = nullptr;
};

/// Sum over the batch of each example's nll_loss, and its exact gradient
/// by backpropagation through time when `grads` is non-null (gradients are
/// overwritten, not accumulated).
template <class S>
S loss_and_gradients(const ParamsT<S>& params, const RnnConfig& config, const BatchView& batch, LossMode mode,
                     ParamsT<S>* grads);

extern template ParamsT<float> to_params<float>(const RnnModel&);
extern template ParamsT<double> to_params<double>(const RnnModel&);
extern template void from_params<float>(const ParamsT<float>&, RnnModel&);
extern template void from_params<double>(const ParamsT<double>&, RnnModel&);
extern template float loss_and_gradients<float>(const ParamsT<float>&, const RnnConfig&, const BatchView&, LossMode,
                                                ParamsT<float>*);
extern template double loss_and_gradients<double>(const ParamsT<double>&, const RnnConfig&, const BatchView&,
                                                  LossMode, ParamsT<double>*);

}  // namespace cwtrnn::rnn
