/*
 * Copyright 2026 The MotionFlow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MOTIONFLOW_FLOW_HPP
#define MOTIONFLOW_FLOW_HPP

#include "motionflow/conditioner.hpp"

namespace motionflow {

enum class Direction { kForward, kInverse };

// Output of a bijection together with its log-determinant summed over the
// whole batch ([1]). Inverse passes report the negated forward value.
template <typename Scalar>
struct FlowOutput {
  Var<Scalar> value;
  Var<Scalar> logdet;
};

// Latent frames are [B * group, C, 1, W]; conditional parameters are [B, ...]
// and item i uses row i / group.

// beta = s * alpha + b per channel.
//
// Inverse directions of actnorm, mixing and coupling are inference-only: they
// carry no gradient to their input and divide by the exact scales the
// forward direction multiplied with.
template <typename Scalar>
FlowOutput<Scalar> actnorm(const Var<Scalar>& x, const ActnormParams<Scalar>& params, Index group,
                           Direction direction);

// Multiplies every channel vector by W = L U. The inverse applies the
// double-precision inverse of the rounded W.
template <typename Scalar>
FlowOutput<Scalar> inv_mixing(const Var<Scalar>& x, const MixingParams<Scalar>& params, Index group,
                              Direction direction);

// Coupling network of one flow step: 3x3 -> 1x1 -> 3x3, last layer zero.
template <typename Scalar>
class FlowStepNet {
 public:
  FlowStepNet() = default;
  FlowStepNet(const std::string& name, Index in_channels, Index hidden, Index out_channels, Rng& rng);

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& h);
  void collect(ParameterList<Scalar>& out);
  Conv2dLayer<Scalar>& layer(int i) { return i == 0 ? first_ : (i == 1 ? second_ : out_); }

 private:
  Conv2dLayer<Scalar> first_, second_, out_;
};

template <typename Scalar>
class Flow {
 public:
  Flow(const ModelConfig& config, Rng& rng);
  Flow(const Flow&) = delete;
  Flow& operator=(const Flow&) = delete;

  // x: [B * group, C_y, 1, N_f]; context: [B, C_y / 4, 1, N_f].
  FlowOutput<Scalar> coupling(Tape<Scalar>& tape, const Var<Scalar>& x, const Var<Scalar>& context, Index step,
                              Index group, Direction direction);

  // One step in the order actnorm, mixing, coupling (reversed for the inverse).
  FlowOutput<Scalar> step(Tape<Scalar>& tape, const Var<Scalar>& x, const ConditioningBundle<Scalar>& bundle,
                          Index k, Index group, Direction direction);

  // frames: [B * group, 1, 1, F] -> latents [B * group, C_y, 1, N_f].
  FlowOutput<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& frames,
                             const ConditioningBundle<Scalar>& bundle, Index group);
  // Exact inverse of forward: latents -> frames [B * group, 1, 1, F].
  Tensor<Scalar> inverse(Tape<Scalar>& tape, const Var<Scalar>& latents, const ConditioningBundle<Scalar>& bundle,
                         Index group);

  void collect(ParameterList<Scalar>& out);
  FlowStepNet<Scalar>& step_net(Index k) { return nets_[std::size_t(k)]; }
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  std::vector<FlowStepNet<Scalar>> nets_;
};

}  // namespace motionflow

#endif  // MOTIONFLOW_FLOW_HPP
