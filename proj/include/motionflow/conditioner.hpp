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

#ifndef MOTIONFLOW_CONDITIONER_HPP
#define MOTIONFLOW_CONDITIONER_HPP

#include "motionflow/layers.hpp"
#include "motionflow/masking.hpp"
#include "motionflow/model_config.hpp"

#include <memory>
#include <vector>

namespace motionflow {

template <typename Scalar>
struct ActnormParams {
  Var<Scalar> log_scale;  // [B, C_y], soft-clamped
  Var<Scalar> scale;      // exp(log_scale)
  Var<Scalar> shift;      // [B, C_y]
};

template <typename Scalar>
struct MixingParams {
  Var<Scalar> raw;       // [B, C_y * C_y]; strict triangles are the LU factors
  Var<Scalar> weight;    // [B, C_y, C_y]
  Var<Scalar> log_diag;  // [B, C_y]
};

template <typename Scalar>
struct StepConditioning {
  ActnormParams<Scalar> actnorm;
  MixingParams<Scalar> mixing;
  Var<Scalar> context;  // [B, C_y / 4, 1, N_f]
};

// Conditional parameters of every flow step, computed once per input batch.
template <typename Scalar>
struct ConditioningBundle {
  Var<Scalar> u;  // [B, C_x, U, N_f]
  std::vector<StepConditioning<Scalar>> steps;
  Index batch() const { return u.dim(0); }
};

// Two-layer conditioner heads for one flow step.
template <typename Scalar>
struct StepHeads {
  LinearLayer<Scalar> fc1_a, fc1_b, fc1_out;
  LinearLayer<Scalar> fc2_a, fc2_b, fc2_out;
  Conv2dLayer<Scalar> cnn1_a, cnn1_b, cnn1_out;
};

template <typename Scalar>
class Conditioner {
 public:
  Conditioner(const ModelConfig& config, Rng& rng);
  Conditioner(const Conditioner&) = delete;
  Conditioner& operator=(const Conditioner&) = delete;

  // Autoregressive trunk `which` (1: time-major ordering, 2: entity-major).
  // With the masked conditioner disabled this is the plain two-convolution
  // replacement. x: [B, C_x, U, N_f] -> [B, 2*C_x, U, N_f].
  Var<Scalar> arn_forward(Tape<Scalar>& tape, const Var<Scalar>& x, int which);

  // u = x + pono(c1) * sigmoid(c2) with (c1, c2) = split(arn1 * arn2).
  Var<Scalar> fuse_context(const Var<Scalar>& x, const Var<Scalar>& arn1, const Var<Scalar>& arn2) const;

  ActnormParams<Scalar> actnorm_params(Tape<Scalar>& tape, const Var<Scalar>& u, Index step);
  MixingParams<Scalar> mixing_params(Tape<Scalar>& tape, const Var<Scalar>& u, Index step);
  Var<Scalar> coupling_context(Tape<Scalar>& tape, const Var<Scalar>& u, Index step);

  ConditioningBundle<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x);

  void collect(ParameterList<Scalar>& out);

  const LocalMaskSet& mask_set(int which, int layer) const;
  Conv2dLayer<Scalar>& arn_layer(int which, int layer) { return arn_[std::size_t(which - 1)][std::size_t(layer)]; }
  StepHeads<Scalar>& heads(Index step) { return heads_[std::size_t(step)]; }

 private:
  Var<Scalar> flatten(const Var<Scalar>& u) const;

  ModelConfig config_;
  // masks_[which][layer]: exclusive, inclusive, inclusive dilated.
  std::vector<std::vector<LocalMaskSet>> masks_;
  std::vector<std::vector<Conv2dLayer<Scalar>>> arn_;
  std::vector<StepHeads<Scalar>> heads_;
};

}  // namespace motionflow

#endif  // MOTIONFLOW_CONDITIONER_HPP
