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

#ifndef MOTIONFLOW_PRIOR_HPP
#define MOTIONFLOW_PRIOR_HPP

#include "motionflow/layers.hpp"
#include "motionflow/model_config.hpp"

#include <cstdint>
#include <utility>

namespace motionflow {

template <typename Scalar>
struct GaussianParams {
  Var<Scalar> mu;
  Var<Scalar> log_sigma;  // clamped to the configured bound
};

// Sum of log N(z; mu, sigma^2) over all elements. Throws NumericError when
// any sigma is not strictly positive.
template <typename Scalar>
Scalar gaussian_log_prob(const Tensor<Scalar>& z, const Tensor<Scalar>& mu, const Tensor<Scalar>& sigma);

// z = mu + temperature * sigma * eps with eps drawn from `rng` in element order.
template <typename Scalar>
Tensor<Scalar> sample_latent(const Tensor<Scalar>& mu, const Tensor<Scalar>& sigma, double temperature, Rng& rng);
template <typename Scalar>
Tensor<Scalar> sample_latent(const Tensor<Scalar>& mu, const Tensor<Scalar>& sigma, double temperature,
                             std::uint64_t seed);

// Gated residual block: dilated 3x3 conv, tanh/sigmoid gate from two 1x1
// convs, zero-initialized 3x3 conv back to the input width, skip added.
template <typename Scalar>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, Index channels, Index hidden, int dilation, Rng& rng);

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& u);
  void collect(ParameterList<Scalar>& out);

 private:
  Conv2dLayer<Scalar> input_, gate_tanh_, gate_sigmoid_, output_;
};

// Time-factorized Gaussian prior over latent frames [C_y, 1, N_f]. Step t
// is conditioned on (h_{t-2}, h_{t-1}). The initial contexts h_0 and h_{-1}
// are learned offsets, plus the latents of the last two observed frames
// when those are given:
//   u = concat(h_{t-2}, conv_1(h_{t-1})), u <- residual blocks,
//   (dz, log sigma) = conv_2(u), mu = dz + conv_1(h_{t-1}).
// Without the dynamic prior every frame is standard normal; without the
// residual stack a single 3x3 conv replaces blocks and conv_2.
template <typename Scalar>
class Prior {
 public:
  Prior(const ModelConfig& config, Rng& rng);
  Prior(const Prior&) = delete;
  Prior& operator=(const Prior&) = delete;

  // Parameters for one step from context frames [B, C_y, 1, N_f].
  GaussianParams<Scalar> step_params(Tape<Scalar>& tape, const Var<Scalar>& h_prev2, const Var<Scalar>& h_prev1);

  // Teacher-forced parameters for every step of latents [B * steps, C_y, 1, N_f].
  // `observed` is empty or holds the latents [B, C_y, 1, N_f] of the last
  // and second-to-last observed frames.
  GaussianParams<Scalar> sequence_params(Tape<Scalar>& tape, const Var<Scalar>& latents, Index steps,
                                         const std::vector<Var<Scalar>>& observed = {});

  // Sum of log p(z_t | z_{<t}) over the batch and steps, as [1].
  Var<Scalar> log_prob(Tape<Scalar>& tape, const Var<Scalar>& latents, Index steps,
                       const std::vector<Var<Scalar>>& observed = {});

  // Learned initial context (0: h_0, 1: h_{-1}) repeated over `batch` items.
  Var<Scalar> initial_context(Tape<Scalar>& tape, int which, Index batch);

  // {h_0, h_{-1}} for `batch` items, shifted by `observed` when given.
  std::vector<Var<Scalar>> initial_contexts(Tape<Scalar>& tape, Index batch,
                                            const std::vector<Var<Scalar>>& observed = {});

  void collect(ParameterList<Scalar>& out);
  bool dynamic() const { return config_.use_dynamic_prior; }

 private:
  GaussianParams<Scalar> head(Tape<Scalar>& tape, const Var<Scalar>& h_prev2, const Var<Scalar>& h_prev1);

  ModelConfig config_;
  Parameter<Scalar> h0_, hm1_;
  Conv2dLayer<Scalar> conv1_, conv2_, single_;
  std::vector<ResidualBlock<Scalar>> blocks_;
};

}  // namespace motionflow

#endif  // MOTIONFLOW_PRIOR_HPP
