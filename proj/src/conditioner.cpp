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

#include "motionflow/conditioner.hpp"

namespace motionflow {

template <typename Scalar>
Conditioner<Scalar>::Conditioner(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const Index cx = config.input_channels(), cy = config.latent_channels();
  const Index grid_t = config.input_steps, grid_n = config.latent_width();
  const Init zero = Init::kZero, normal = Init::kLecunNormal;

  const OrderingKind kinds[2] = {OrderingKind::kTimeMajorSCurve, OrderingKind::kEntityMajorSCurve};
  for (int which = 0; which < 2; ++which) {
    const Ordering ordering = generate_ordering(kinds[which], grid_t, grid_n);
    masks_.push_back({build_mask_set(ordering, 3, 1, false), build_mask_set(ordering, 3, 1, true),
                      build_mask_set(ordering, 3, config.arn_dilation, true)});
    const std::string prefix = "arn" + std::to_string(which + 1);
    std::vector<Conv2dLayer<Scalar>> layers;
    if (config.use_masked_conditioner) {
      layers.emplace_back(prefix + ".0", cx, config.arn_hidden1, 3, 1, normal, rng);
      layers.emplace_back(prefix + ".1", config.arn_hidden1, config.arn_hidden2, 3, 1, normal, rng);
      layers.emplace_back(prefix + ".2", config.arn_hidden2, 2 * cx, 3, int(config.arn_dilation), normal, rng);
    } else {
      const Index width = config.plain_conditioner_channels;
      layers.emplace_back(prefix + ".plain0", cx, width, 3, 1, normal, rng);
      layers.emplace_back(prefix + ".plain1", width, 2 * cx, 3, 1, normal, rng);
    }
    arn_.push_back(std::move(layers));
  }

  const Index flat = cx * grid_t * grid_n, hidden = config.fc_hidden;
  heads_.reserve(std::size_t(config.flow_steps));
  for (Index k = 0; k < config.flow_steps; ++k) {
    const std::string p = "step" + std::to_string(k);
    heads_.push_back(StepHeads<Scalar>{
        LinearLayer<Scalar>(p + ".fc1.0", flat, hidden, normal, rng),
        LinearLayer<Scalar>(p + ".fc1.1", hidden, hidden, normal, rng),
        LinearLayer<Scalar>(p + ".fc1.2", hidden, 2 * cy, zero, rng),
        LinearLayer<Scalar>(p + ".fc2.0", flat, hidden, normal, rng),
        LinearLayer<Scalar>(p + ".fc2.1", hidden, hidden, normal, rng),
        LinearLayer<Scalar>(p + ".fc2.2", hidden, cy * cy, zero, rng),
        Conv2dLayer<Scalar>(p + ".cnn1.0", cx, config.cnn1_hidden, 3, 1, normal, rng),
        Conv2dLayer<Scalar>(p + ".cnn1.1", config.cnn1_hidden, cy / 2, 3, 1, normal, rng),
        Conv2dLayer<Scalar>(p + ".cnn1.2", cy / 2, cy / 4, 3, 1, zero, rng),
    });
  }
}

template <typename Scalar>
const LocalMaskSet& Conditioner<Scalar>::mask_set(int which, int layer) const {
  return masks_.at(std::size_t(which - 1)).at(std::size_t(layer));
}

template <typename Scalar>
Var<Scalar> Conditioner<Scalar>::arn_forward(Tape<Scalar>& tape, const Var<Scalar>& x, int which) {
  if (which != 1 && which != 2) throw std::invalid_argument("arn_forward: which must be 1 or 2");
  if (x.rank() != 4 || x.dim(1) != config_.input_channels() || x.dim(2) != config_.input_steps ||
      x.dim(3) != config_.latent_width()) {
    throw ShapeError("arn_forward: input " + to_string(x.shape()) + " does not match the conditioner grid");
  }
  auto& layers = arn_[std::size_t(which - 1)];
  if (!config_.use_masked_conditioner) {
    return layers[1](tape, elu(layers[0](tape, x)));
  }
  const auto& masks = masks_[std::size_t(which - 1)];
  Var<Scalar> h = elu(layers[0](tape, x, masks[0]));
  h = elu(layers[1](tape, h, masks[1]));
  return layers[2](tape, h, masks[2]);
}

template <typename Scalar>
Var<Scalar> Conditioner<Scalar>::fuse_context(const Var<Scalar>& x, const Var<Scalar>& arn1,
                                              const Var<Scalar>& arn2) const {
  if (arn1.shape() != arn2.shape()) throw ShapeError("fuse_context: ARN outputs differ in shape");
  if (arn1.rank() != 4 || arn1.dim(1) != 2 * x.dim(1) || arn1.dim(0) != x.dim(0) || arn1.dim(2) != x.dim(2) ||
      arn1.dim(3) != x.dim(3)) {
    throw ShapeError("fuse_context: ARN outputs must have twice the channels of x on the same grid");
  }
  auto [c1, c2] = split(arn1 * arn2);
  c1 = pono(c1, Scalar(config_.pono_epsilon));
  return x + c1 * sigmoid(c2);
}

template <typename Scalar>
Var<Scalar> Conditioner<Scalar>::flatten(const Var<Scalar>& u) const {
  return reshape(u, {u.dim(0), u.dim(1) * u.dim(2) * u.dim(3)});
}

template <typename Scalar>
ActnormParams<Scalar> Conditioner<Scalar>::actnorm_params(Tape<Scalar>& tape, const Var<Scalar>& u, Index step) {
  auto& h = heads_.at(std::size_t(step));
  const Index cy = config_.latent_channels();
  const Var<Scalar> raw = h.fc1_out(tape, elu(h.fc1_b(tape, elu(h.fc1_a(tape, flatten(u))))));
  const Var<Scalar> log_scale = soft_clamp(narrow(raw, 1, 0, cy), Scalar(config_.scale_bound));
  return {log_scale, exp(log_scale), narrow(raw, 1, cy, cy)};
}

template <typename Scalar>
MixingParams<Scalar> Conditioner<Scalar>::mixing_params(Tape<Scalar>& tape, const Var<Scalar>& u, Index step) {
  auto& h = heads_.at(std::size_t(step));
  const Index cy = config_.latent_channels();
  const Scalar bound(config_.scale_bound);
  const Var<Scalar> raw = h.fc2_out(tape, elu(h.fc2_b(tape, elu(h.fc2_a(tape, flatten(u))))));
  return {raw, lu_compose(raw, cy, bound), lu_log_diagonal(raw, cy, bound)};
}

template <typename Scalar>
Var<Scalar> Conditioner<Scalar>::coupling_context(Tape<Scalar>& tape, const Var<Scalar>& u, Index step) {
  auto& h = heads_.at(std::size_t(step));
  const Var<Scalar> c = h.cnn1_out(tape, elu(h.cnn1_b(tape, elu(h.cnn1_a(tape, u)))));
  return mean_over_height(c);
}

template <typename Scalar>
ConditioningBundle<Scalar> Conditioner<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x) {
  ConditioningBundle<Scalar> bundle;
  bundle.u = fuse_context(x, arn_forward(tape, x, 1), arn_forward(tape, x, 2));
  for (Index k = 0; k < config_.flow_steps; ++k) {
    bundle.steps.push_back(
        {actnorm_params(tape, bundle.u, k), mixing_params(tape, bundle.u, k), coupling_context(tape, bundle.u, k)});
  }
  return bundle;
}

template <typename Scalar>
void Conditioner<Scalar>::collect(ParameterList<Scalar>& out) {
  for (auto& layers : arn_)
    for (auto& layer : layers) layer.collect(out);
  for (auto& h : heads_) {
    for (auto* l : {&h.fc1_a, &h.fc1_b, &h.fc1_out, &h.fc2_a, &h.fc2_b, &h.fc2_out}) l->collect(out);
    for (auto* c : {&h.cnn1_a, &h.cnn1_b, &h.cnn1_out}) c->collect(out);
  }
}

template class Conditioner<float>;
template class Conditioner<double>;

}  // namespace motionflow
