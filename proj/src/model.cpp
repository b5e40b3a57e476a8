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

#include "motionflow/model.hpp"

#include <algorithm>
#include <set>

namespace motionflow {

template <typename Scalar>
Tensor<Scalar> conditioner_grid(const Tensor<Scalar>& x) {
  require_rank(x, 3, "conditioner input");
  const Index batch = x.dim(0), steps = x.dim(1), width = x.dim(2);
  if (width % kSqueezeFactor != 0) throw ShapeError("conditioner input: frame width not divisible by 4");
  const Index cols = width / kSqueezeFactor;
  Tensor<Scalar> grid({batch, kSqueezeFactor, steps, cols});
  for (Index b = 0; b < batch; ++b)
    for (Index j = 0; j < kSqueezeFactor; ++j)
      for (Index u = 0; u < steps; ++u)
        for (Index m = 0; m < cols; ++m) grid.at(b, j, u, m) = x[(b * steps + u) * width + m * kSqueezeFactor + j];
  return grid;
}

template <typename Scalar>
MotionFlowModel<Scalar>::MotionFlowModel(const ModelConfig& config)
    : config_(config),
      conditioner_rng_(Rng::derive(config.seed, 0)),
      flow_rng_(Rng::derive(config.seed, 1)),
      prior_rng_(Rng::derive(config.seed, 2)),
      conditioner_(config, conditioner_rng_),
      flow_(config, flow_rng_),
      prior_(config, prior_rng_) {
  conditioner_.collect(parameters_);
  flow_.collect(parameters_);
  prior_.collect(parameters_);
  std::set<std::string> names;
  for (const auto* p : parameters_) {
    if (!names.insert(p->name()).second) throw std::logic_error("duplicate parameter name " + p->name());
  }
}

template <typename Scalar>
Index MotionFlowModel<Scalar>::parameter_count() const {
  Index n = 0;
  for (const auto* p : parameters_) n += p->value().size();
  return n;
}

template <typename Scalar>
void MotionFlowModel<Scalar>::zero_grad() {
  for (auto* p : parameters_) p->zero_grad();
}

template <typename Scalar>
void MotionFlowModel<Scalar>::check_batch(const Tensor<Scalar>& t, Index steps, const char* what) const {
  require_rank(t, 3, what);
  if (t.dim(1) != steps || t.dim(2) != config_.frame_width()) {
    throw ShapeError(std::string(what) + ": expected [B, " + std::to_string(steps) + ", " +
                     std::to_string(config_.frame_width()) + "], got " + to_string(t.shape()));
  }
}

template <typename Scalar>
ConditioningBundle<Scalar> MotionFlowModel<Scalar>::condition(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  check_batch(x, config_.input_steps, "model input");
  return conditioner_(tape, tape.constant(conditioner_grid(x)));
}

template <typename Scalar>
std::vector<Var<Scalar>> MotionFlowModel<Scalar>::observed_latents(Tape<Scalar>& tape, const Tensor<Scalar>& x,
                                                                   const ConditioningBundle<Scalar>& bundle) {
  if (!prior_.dynamic()) return {};
  check_batch(x, config_.input_steps, "model input");
  const Index batch = x.dim(0), u = config_.input_steps, width = config_.frame_width();
  std::vector<Var<Scalar>> out;
  for (Index back : {Index(1), Index(2)}) {
    const Index t = std::max<Index>(u - back, 0);
    const Tensor<Scalar> frame = narrow_tensor(x, 1, t, 1).reshaped({batch, 1, 1, width});
    out.push_back(flow_.forward(tape, tape.constant(frame), bundle, 1).value);
  }
  return out;
}

template <typename Scalar>
void MotionFlowModel<Scalar>::diagnose(const std::vector<std::pair<std::string, Var<Scalar>>>& stages) const {
  for (const auto& [name, var] : stages) {
    if (!var.value().all_finite()) throw NumericError("non-finite values in " + name);
  }
  throw NumericError("non-finite negative log-likelihood");
}

template <typename Scalar>
Var<Scalar> MotionFlowModel<Scalar>::nll(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& y) {
  check_batch(y, config_.output_steps, "model target");
  const Index batch = y.dim(0), steps = config_.output_steps;
  if (x.rank() != 3 || x.dim(0) != batch) throw ShapeError("nll: input and target batch sizes differ");

  if (!x.all_finite()) throw NumericError("non-finite values in input");
  if (!y.all_finite()) throw NumericError("non-finite values in target");

  std::vector<std::pair<std::string, Var<Scalar>>> stages;
  const ConditioningBundle<Scalar> bundle = condition(tape, x);
  stages.emplace_back("conditioner context u", bundle.u);
  for (std::size_t k = 0; k < bundle.steps.size(); ++k) {
    const auto& s = bundle.steps[k];
    const std::string p = "flow step " + std::to_string(k) + " ";
    stages.emplace_back(p + "actnorm scale", s.actnorm.scale);
    stages.emplace_back(p + "actnorm shift", s.actnorm.shift);
    stages.emplace_back(p + "mixing weight", s.mixing.weight);
    stages.emplace_back(p + "coupling context", s.context);
  }
  const Var<Scalar> frames = tape.constant(y.reshaped({batch * steps, 1, 1, config_.frame_width()}));
  const FlowOutput<Scalar> z = flow_.forward(tape, frames, bundle, steps);
  stages.emplace_back("latents", z.value);
  stages.emplace_back("flow log-determinant", z.logdet);
  const Var<Scalar> log_prior = prior_.log_prob(tape, z.value, steps, observed_latents(tape, x, bundle));
  stages.emplace_back("prior log-probability", log_prior);

  const double dims = double(batch * steps * config_.frame_dims());
  const Var<Scalar> loss = Scalar(-1.0 / dims) * (log_prior + z.logdet);
  if (!loss.value().all_finite()) diagnose(stages);
  return loss;
}

template <typename Scalar>
Scalar MotionFlowModel<Scalar>::nll_value(const Tensor<Scalar>& x, const Tensor<Scalar>& y) {
  Tape<Scalar> tape(false);
  return nll(tape, x, y).value()[0];
}

template <typename Scalar>
Tensor<Scalar> MotionFlowModel<Scalar>::encode(const Tensor<Scalar>& x, const Tensor<Scalar>& y) {
  check_batch(y, config_.output_steps, "model target");
  Tape<Scalar> tape(false);
  const ConditioningBundle<Scalar> bundle = condition(tape, x);
  const Var<Scalar> frames =
      tape.constant(y.reshaped({y.dim(0) * config_.output_steps, 1, 1, config_.frame_width()}));
  return flow_.forward(tape, frames, bundle, config_.output_steps).value.value();
}

template <typename Scalar>
Tensor<Scalar> MotionFlowModel<Scalar>::decode(const Tensor<Scalar>& x, const Tensor<Scalar>& latents) {
  Tape<Scalar> tape(false);
  const ConditioningBundle<Scalar> bundle = condition(tape, x);
  const Tensor<Scalar> frames = flow_.inverse(tape, tape.constant(latents), bundle, config_.output_steps);
  return frames.reshaped({x.dim(0), config_.output_steps, config_.frame_width()});
}

template <typename Scalar>
Tensor<Scalar> MotionFlowModel<Scalar>::predict_once(const Tensor<Scalar>& x, double temperature,
                                                     std::uint64_t seed) {
  Tape<Scalar> tape(false);
  const ConditioningBundle<Scalar> bundle = condition(tape, x);
  const Index batch = x.dim(0), width = config_.frame_width();
  const Shape latent_shape{batch, config_.latent_channels(), 1, config_.latent_width()};
  Var<Scalar> h_prev2, h_prev1;
  if (prior_.dynamic()) {
    const std::vector<Var<Scalar>> initial = prior_.initial_contexts(tape, batch, observed_latents(tape, x, bundle));
    h_prev2 = initial[1];
    h_prev1 = initial[0];
  } else {
    h_prev2 = h_prev1 = tape.constant(Tensor<Scalar>(latent_shape));
  }
  Rng rng(seed);
  Tensor<Scalar> out({batch, config_.output_steps, width});
  for (Index t = 0; t < config_.output_steps; ++t) {
    const GaussianParams<Scalar> p = prior_.step_params(tape, h_prev2, h_prev1);
    const Tensor<Scalar> sigma(p.log_sigma.shape(), p.log_sigma.value().array().exp());
    const Var<Scalar> z = tape.constant(sample_latent(p.mu.value(), sigma, temperature, rng));
    const Tensor<Scalar> frame = flow_.inverse(tape, z, bundle, 1);
    if (!frame.all_finite()) throw NumericError("non-finite predicted frame at step " + std::to_string(t + 1));
    for (Index b = 0; b < batch; ++b)
      for (Index f = 0; f < width; ++f) out[(b * config_.output_steps + t) * width + f] = frame[b * width + f];
    h_prev2 = h_prev1;
    h_prev1 = z;
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> MotionFlowModel<Scalar>::predict(const Tensor<Scalar>& x, const PredictOptions& options) {
  check_batch(x, config_.input_steps, "model input");
  switch (options.mode) {
    case PredictMode::kMean:
      return predict_once(x, 0.0, options.seed);
    case PredictMode::kSample:
      return predict_once(x, options.temperature, options.seed);
    case PredictMode::kAverage: {
      if (options.samples < 1) throw std::invalid_argument("predict: average mode needs at least one sample");
      Tensor<Scalar> mean = predict_once(x, options.temperature, options.seed);
      for (Index s = 1; s < options.samples; ++s) {
        const Tensor<Scalar> next = predict_once(x, options.temperature, options.seed + std::uint64_t(s));
        mean.array() += (next.array() - mean.array()) / Scalar(double(s + 1));
      }
      return mean;
    }
  }
  throw std::invalid_argument("predict: unknown mode");
}

template Tensor<float> conditioner_grid(const Tensor<float>&);
template Tensor<double> conditioner_grid(const Tensor<double>&);
template class MotionFlowModel<float>;
template class MotionFlowModel<double>;

}  // namespace motionflow
