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

#include "motionflow/flow.hpp"

namespace motionflow {

namespace {

template <typename Scalar>
void require_group(const Var<Scalar>& x, Index group, Index batch, const char* op) {
  if (x.rank() != 4) throw ShapeError(std::string(op) + ": expected a rank-4 input, got " + to_string(x.shape()));
  if (group < 1 || x.dim(0) != batch * group) {
    throw ShapeError(std::string(op) + ": " + std::to_string(x.dim(0)) + " items do not match batch " +
                     std::to_string(batch) + " x group " + std::to_string(group));
  }
}

// (x - shift) / scale per channel, dividing by the very values the forward
// direction multiplied with. Inverse directions carry no gradient.
template <typename Scalar>
Tensor<Scalar> channel_unaffine(const Tensor<Scalar>& x, const Tensor<Scalar>& scale, const Tensor<Scalar>& shift,
                                Index group) {
  const Index items = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<Scalar> out(x.shape());
  for (Index i = 0; i < items; ++i)
    for (Index ch = 0; ch < c; ++ch) {
      const Index p = (i / group) * c + ch, base = (i * c + ch) * plane;
      for (Index k = 0; k < plane; ++k) out[base + k] = Scalar((double(x[base + k]) - shift[p]) / scale[p]);
    }
  return out;
}

}  // namespace

template <typename Scalar>
FlowOutput<Scalar> actnorm(const Var<Scalar>& x, const ActnormParams<Scalar>& params, Index group,
                           Direction direction) {
  require_group(x, group, params.scale.dim(0), "actnorm");
  const Scalar positions(double(x.dim(2) * x.dim(3) * group));
  const Var<Scalar> logdet = positions * sum(params.log_scale);
  if (direction == Direction::kForward) {
    return {channel_affine(x, params.scale, params.shift, group), logdet};
  }
  return {x.tape().constant(channel_unaffine(x.value(), params.scale.value(), params.shift.value(), group)), -logdet};
}

template <typename Scalar>
FlowOutput<Scalar> inv_mixing(const Var<Scalar>& x, const MixingParams<Scalar>& params, Index group,
                              Direction direction) {
  const Index items = params.weight.dim(0), c = params.weight.dim(1);
  require_group(x, group, items, "inv_mixing");
  const Scalar positions(double(x.dim(2) * x.dim(3) * group));
  const Var<Scalar> logdet = positions * sum(params.log_diag);
  if (direction == Direction::kForward) return {channel_mix(x, params.weight, group), logdet};

  // Inverts the weight actually applied in the forward direction, in double,
  // so 32-bit round trips lose only the final rounding.
  using Mat = RowMajorMatrix<double>;
  Tensor<Scalar> inverse({items, c, c});
  for (Index i = 0; i < items; ++i) {
    const Mat w = Eigen::Map<const RowMajorMatrix<Scalar>>(params.weight.value().data() + i * c * c, c, c)
                      .template cast<double>();
    Eigen::Map<RowMajorMatrix<Scalar>>(inverse.data() + i * c * c, c, c) =
        w.partialPivLu().inverse().template cast<Scalar>();
  }
  return {channel_mix(x, x.tape().constant(std::move(inverse)), group), -logdet};
}

template <typename Scalar>
FlowStepNet<Scalar>::FlowStepNet(const std::string& name, Index in_channels, Index hidden, Index out_channels,
                                 Rng& rng)
    : first_(name + ".0", in_channels, hidden, 3, 1, Init::kLecunNormal, rng),
      second_(name + ".1", hidden, hidden, 1, 1, Init::kLecunNormal, rng),
      out_(name + ".2", hidden, out_channels, 3, 1, Init::kZero, rng) {}

template <typename Scalar>
Var<Scalar> FlowStepNet<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& h) {
  return out_(tape, elu(second_(tape, elu(first_(tape, h)))));
}

template <typename Scalar>
void FlowStepNet<Scalar>::collect(ParameterList<Scalar>& out) {
  first_.collect(out);
  second_.collect(out);
  out_.collect(out);
}

template <typename Scalar>
Flow<Scalar>::Flow(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const Index c = config.latent_channels();
  if (c % 4 != 0) throw ShapeError("flow: latent channels must be divisible by 4");
  nets_.reserve(std::size_t(config.flow_steps));
  for (Index k = 0; k < config.flow_steps; ++k) {
    nets_.emplace_back("step" + std::to_string(k) + ".cnn2", c / 2 + c / 4, config.cnn2_hidden, c, rng);
  }
}

template <typename Scalar>
FlowOutput<Scalar> Flow<Scalar>::coupling(Tape<Scalar>& tape, const Var<Scalar>& x, const Var<Scalar>& context,
                                          Index step, Index group, Direction direction) {
  require_group(x, group, context.dim(0), "coupling");
  if (x.dim(1) % 2 != 0) throw ShapeError("coupling: channel count must be even");
  auto [a1, a2] = split(x);
  const Var<Scalar> ctx = group == 1 ? context : repeat_items(context, group);
  auto [raw_s, shift] = cross(nets_.at(std::size_t(step))(tape, concat(a1, ctx, 1)));
  const Var<Scalar> log_s = soft_clamp(raw_s, Scalar(config_.scale_bound));
  const Var<Scalar> scale = exp(log_s);
  if (direction == Direction::kForward) return {concat(a1, scale * a2 + shift, 1), sum(log_s)};
  Tensor<Scalar> restored(a2.shape(), ((a2.value().array().template cast<double>() -
                                        shift.value().array().template cast<double>()) /
                                       scale.value().array().template cast<double>())
                                          .template cast<Scalar>());
  return {concat(a1, tape.constant(std::move(restored)), 1), -sum(log_s)};
}

template <typename Scalar>
FlowOutput<Scalar> Flow<Scalar>::step(Tape<Scalar>& tape, const Var<Scalar>& x,
                                      const ConditioningBundle<Scalar>& bundle, Index k, Index group,
                                      Direction direction) {
  const StepConditioning<Scalar>& p = bundle.steps.at(std::size_t(k));
  if (direction == Direction::kForward) {
    const FlowOutput<Scalar> a = actnorm(x, p.actnorm, group, direction);
    const FlowOutput<Scalar> m = inv_mixing(a.value, p.mixing, group, direction);
    const FlowOutput<Scalar> c = coupling(tape, m.value, p.context, k, group, direction);
    return {c.value, a.logdet + m.logdet + c.logdet};
  }
  const FlowOutput<Scalar> c = coupling(tape, x, p.context, k, group, direction);
  const FlowOutput<Scalar> m = inv_mixing(c.value, p.mixing, group, direction);
  const FlowOutput<Scalar> a = actnorm(m.value, p.actnorm, group, direction);
  return {a.value, a.logdet + m.logdet + c.logdet};
}

template <typename Scalar>
FlowOutput<Scalar> Flow<Scalar>::forward(Tape<Scalar>& tape, const Var<Scalar>& frames,
                                         const ConditioningBundle<Scalar>& bundle, Index group) {
  require_group(frames, group, bundle.batch(), "flow forward");
  if (frames.dim(1) != 1 || frames.dim(2) != 1 || frames.dim(3) != config_.frame_width()) {
    throw ShapeError("flow forward: frames must be [items, 1, 1, " + std::to_string(config_.frame_width()) +
                     "], got " + to_string(frames.shape()));
  }
  FlowOutput<Scalar> out{squeeze_frames(frames, kSqueezeFactor), {}};
  for (Index k = 0; k < config_.flow_steps; ++k) {
    const FlowOutput<Scalar> s = step(tape, out.value, bundle, k, group, Direction::kForward);
    out.value = s.value;
    out.logdet = k == 0 ? s.logdet : out.logdet + s.logdet;
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> Flow<Scalar>::inverse(Tape<Scalar>& tape, const Var<Scalar>& latents,
                                     const ConditioningBundle<Scalar>& bundle, Index group) {
  require_group(latents, group, bundle.batch(), "flow inverse");
  require_shape(latents.value(), {latents.dim(0), config_.latent_channels(), 1, config_.latent_width()},
                "flow inverse latents");
  Var<Scalar> x = latents;
  for (Index k = config_.flow_steps; k-- > 0;) x = step(tape, x, bundle, k, group, Direction::kInverse).value;
  return unsqueeze_tensor(x.value(), kSqueezeFactor);
}

template <typename Scalar>
void Flow<Scalar>::collect(ParameterList<Scalar>& out) {
  for (auto& net : nets_) net.collect(out);
}

#define MOTIONFLOW_INSTANTIATE(S)                                                                          \
  template FlowOutput<S> actnorm(const Var<S>&, const ActnormParams<S>&, Index, Direction);              \
  template FlowOutput<S> inv_mixing(const Var<S>&, const MixingParams<S>&, Index, Direction);            \
  template class FlowStepNet<S>;                                                                         \
  template class Flow<S>;

MOTIONFLOW_INSTANTIATE(float)
MOTIONFLOW_INSTANTIATE(double)
#undef MOTIONFLOW_INSTANTIATE

}  // namespace motionflow
