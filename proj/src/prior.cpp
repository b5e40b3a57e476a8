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

#include "motionflow/prior.hpp"

#include <cmath>
#include <numbers>

namespace motionflow {

template <typename Scalar>
Scalar gaussian_log_prob(const Tensor<Scalar>& z, const Tensor<Scalar>& mu, const Tensor<Scalar>& sigma) {
  if (z.shape() != mu.shape() || z.shape() != sigma.shape()) {
    throw ShapeError("gaussian_log_prob: shapes differ " + to_string(z.shape()) + ", " + to_string(mu.shape()) +
                     ", " + to_string(sigma.shape()));
  }
  if (!(sigma.array() > Scalar(0)).all()) throw NumericError("gaussian_log_prob: sigma must be positive");
  const auto r = (z.array() - mu.array()) / sigma.array();
  const Scalar half_log_two_pi = Scalar(0.5 * std::log(2.0 * std::numbers::pi));
  return (Scalar(-0.5) * r.square() - sigma.array().log() - half_log_two_pi).sum();
}

template <typename Scalar>
Tensor<Scalar> sample_latent(const Tensor<Scalar>& mu, const Tensor<Scalar>& sigma, double temperature, Rng& rng) {
  if (mu.shape() != sigma.shape()) throw ShapeError("sample_latent: mu and sigma shapes differ");
  if (!(temperature >= 0)) throw std::invalid_argument("sample_latent: temperature must be non-negative");
  Tensor<Scalar> z = mu;
  if (temperature == 0) return z;
  for (Index i = 0; i < z.size(); ++i) z[i] += Scalar(temperature * double(sigma[i]) * rng.normal());
  return z;
}

template <typename Scalar>
Tensor<Scalar> sample_latent(const Tensor<Scalar>& mu, const Tensor<Scalar>& sigma, double temperature,
                             std::uint64_t seed) {
  Rng rng(seed);
  return sample_latent(mu, sigma, temperature, rng);
}

template <typename Scalar>
ResidualBlock<Scalar>::ResidualBlock(const std::string& name, Index channels, Index hidden, int dilation, Rng& rng)
    : input_(name + ".conv", channels, hidden, 3, dilation, Init::kLecunNormal, rng),
      gate_tanh_(name + ".gate_tanh", hidden, hidden, 1, 1, Init::kLecunNormal, rng),
      gate_sigmoid_(name + ".gate_sigmoid", hidden, hidden, 1, 1, Init::kLecunNormal, rng),
      output_(name + ".out", hidden, channels, 3, dilation, Init::kZero, rng) {}

template <typename Scalar>
Var<Scalar> ResidualBlock<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& u) {
  const Var<Scalar> h = input_(tape, u);
  return u + output_(tape, tanh(gate_tanh_(tape, h)) * sigmoid(gate_sigmoid_(tape, h)));
}

template <typename Scalar>
void ResidualBlock<Scalar>::collect(ParameterList<Scalar>& out) {
  input_.collect(out);
  gate_tanh_.collect(out);
  gate_sigmoid_.collect(out);
  output_.collect(out);
}

template <typename Scalar>
Prior<Scalar>::Prior(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  if (!config.use_dynamic_prior) return;
  const Index c = config.latent_channels(), w = config.latent_width();
  h0_ = Parameter<Scalar>("prior.h0", Tensor<Scalar>(Shape{c, 1, w}));
  hm1_ = Parameter<Scalar>("prior.h_minus1", Tensor<Scalar>(Shape{c, 1, w}));
  conv1_ = Conv2dLayer<Scalar>("prior.conv1", c, c, 1, 1, Init::kZero, rng);
  if (config.use_residual_net) {
    blocks_.reserve(3);
    for (int dilation : {1, 2, 4}) {
      blocks_.emplace_back("prior.block" + std::to_string(blocks_.size()), 2 * c, config.prior_hidden, dilation,
                           rng);
    }
    conv2_ = Conv2dLayer<Scalar>("prior.conv2", 2 * c, 2 * c, 1, 1, Init::kZero, rng);
  } else {
    single_ = Conv2dLayer<Scalar>("prior.single", 2 * c, 2 * c, 3, 1, Init::kZero, rng);
  }
}

template <typename Scalar>
Var<Scalar> Prior<Scalar>::initial_context(Tape<Scalar>& tape, int which, Index batch) {
  if (!dynamic()) throw std::logic_error("initial_context: the static prior has no context");
  Parameter<Scalar>& p = which == 0 ? h0_ : hm1_;
  const Shape& s = p.value().shape();
  const Var<Scalar> one = reshape(tape.parameter(p), {1, s[0], s[1], s[2]});
  return batch == 1 ? one : repeat_items(one, batch);
}

template <typename Scalar>
std::vector<Var<Scalar>> Prior<Scalar>::initial_contexts(Tape<Scalar>& tape, Index batch,
                                                         const std::vector<Var<Scalar>>& observed) {
  if (!observed.empty() && observed.size() != 2) throw ShapeError("prior: expected two observed latents");
  const Shape expected{batch, config_.latent_channels(), 1, config_.latent_width()};
  std::vector<Var<Scalar>> out;
  for (int which : {0, 1}) {
    Var<Scalar> h = initial_context(tape, which, batch);
    if (!observed.empty()) {
      require_shape(observed[std::size_t(which)].value(), expected, "prior observed latents");
      h = h + observed[std::size_t(which)];
    }
    out.push_back(h);
  }
  return out;
}

template <typename Scalar>
GaussianParams<Scalar> Prior<Scalar>::head(Tape<Scalar>& tape, const Var<Scalar>& h_prev2,
                                           const Var<Scalar>& h_prev1) {
  const Var<Scalar> skip = conv1_(tape, h_prev1);
  Var<Scalar> u = concat(h_prev2, skip, 1);
  Var<Scalar> out;
  if (config_.use_residual_net) {
    for (auto& block : blocks_) u = block(tape, u);
    out = conv2_(tape, u);
  } else {
    out = single_(tape, u);
  }
  auto [dz, log_sigma] = split(out);
  const Scalar bound(config_.log_sigma_bound);
  return {dz + skip, clamp(log_sigma, -bound, bound)};
}

template <typename Scalar>
GaussianParams<Scalar> Prior<Scalar>::step_params(Tape<Scalar>& tape, const Var<Scalar>& h_prev2,
                                                  const Var<Scalar>& h_prev1) {
  const Shape expected{h_prev1.dim(0), config_.latent_channels(), 1, config_.latent_width()};
  require_shape(h_prev1.value(), expected, "prior h_prev1");
  require_shape(h_prev2.value(), expected, "prior h_prev2");
  if (!dynamic()) {
    const Var<Scalar> zero = tape.constant(Tensor<Scalar>(expected));
    return {zero, zero};
  }
  return head(tape, h_prev2, h_prev1);
}

template <typename Scalar>
GaussianParams<Scalar> Prior<Scalar>::sequence_params(Tape<Scalar>& tape, const Var<Scalar>& latents, Index steps,
                                                      const std::vector<Var<Scalar>>& observed) {
  const Index c = config_.latent_channels(), w = config_.latent_width();
  if (latents.rank() != 4 || steps < 1 || latents.dim(0) % steps != 0 || latents.dim(1) != c || latents.dim(2) != 1 ||
      latents.dim(3) != w) {
    throw ShapeError("prior: latents " + to_string(latents.shape()) + " do not match [B * " + std::to_string(steps) +
                     ", " + std::to_string(c) + ", 1, " + std::to_string(w) + "]");
  }
  if (!dynamic()) {
    const Var<Scalar> zero = tape.constant(Tensor<Scalar>(latents.shape()));
    return {zero, zero};
  }
  const std::vector<Var<Scalar>> initial =
      observed.empty() ? std::vector<Var<Scalar>>{tape.parameter(h0_), tape.parameter(hm1_)}
                       : initial_contexts(tape, latents.dim(0) / steps, observed);
  return head(tape, lag_frames(latents, initial, steps, 2), lag_frames(latents, initial, steps, 1));
}

template <typename Scalar>
Var<Scalar> Prior<Scalar>::log_prob(Tape<Scalar>& tape, const Var<Scalar>& latents, Index steps,
                                    const std::vector<Var<Scalar>>& observed) {
  if (!dynamic()) {
    sequence_params(tape, latents, steps);  // shape validation only
    return standard_normal_log_prob(latents);
  }
  const GaussianParams<Scalar> p = sequence_params(tape, latents, steps, observed);
  return gaussian_log_prob(latents, p.mu, p.log_sigma);
}

template <typename Scalar>
void Prior<Scalar>::collect(ParameterList<Scalar>& out) {
  if (!dynamic()) return;
  out.push_back(&h0_);
  out.push_back(&hm1_);
  conv1_.collect(out);
  if (config_.use_residual_net) {
    for (auto& block : blocks_) block.collect(out);
    conv2_.collect(out);
  } else {
    single_.collect(out);
  }
}

#define MOTIONFLOW_INSTANTIATE(S)                                                                              \
  template S gaussian_log_prob(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);                         \
  template Tensor<S> sample_latent(const Tensor<S>&, const Tensor<S>&, double, Rng&);                         \
  template Tensor<S> sample_latent(const Tensor<S>&, const Tensor<S>&, double, std::uint64_t);                \
  template class ResidualBlock<S>;                                                                            \
  template class Prior<S>;

MOTIONFLOW_INSTANTIATE(float)
MOTIONFLOW_INSTANTIATE(double)
#undef MOTIONFLOW_INSTANTIATE

}  // namespace motionflow
