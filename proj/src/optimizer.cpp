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

#include "motionflow/optimizer.hpp"

#include <cmath>

namespace motionflow {

template <typename Scalar>
Adam<Scalar>::Adam(ParameterList<Scalar> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config.learning_rate > 0) || !(config.weight_decay >= 0) || !(config.beta1 >= 0 && config.beta1 < 1) ||
      !(config.beta2 >= 0 && config.beta2 < 1) || !(config.epsilon > 0)) {
    throw ConfigError("invalid Adam settings");
  }
  for (const auto* p : params_) {
    m_.emplace_back(p->value().shape());
    v_.emplace_back(p->value().shape());
  }
}

template <typename Scalar>
void Adam<Scalar>::step() {
  ++steps_;
  const double lr = config_.learning_rate;
  const Scalar decay = Scalar(1.0 - lr * config_.weight_decay);
  const Scalar b1 = Scalar(config_.beta1), b2 = Scalar(config_.beta2);
  const Scalar correction1 = Scalar(1.0 - std::pow(config_.beta1, double(steps_)));
  const Scalar correction2 = Scalar(1.0 - std::pow(config_.beta2, double(steps_)));
  const Scalar eps = Scalar(config_.epsilon), rate = Scalar(lr);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter<Scalar>& p = *params_[i];
    if (!p.trainable()) continue;
    auto& w = p.value().array();
    const auto& g = p.grad().array();
    auto& m = m_[i].array();
    auto& v = v_[i].array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    w *= decay;
    w -= rate * (m / correction1) / ((v / correction2).sqrt() + eps);
  }
}

template <typename Scalar>
double gradient_norm(const ParameterList<Scalar>& params) {
  double total = 0.0;
  for (const auto* p : params) total += p->grad().array().template cast<double>().square().sum();
  return std::sqrt(total);
}

template <typename Scalar>
double clip_gradient_norm(const ParameterList<Scalar>& params, double max_norm) {
  const double norm = gradient_norm(params);
  if (max_norm > 0 && norm > max_norm) {
    const Scalar factor = Scalar(max_norm / norm);
    for (auto* p : params) p->grad().array() *= factor;
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;
template double gradient_norm(const ParameterList<float>&);
template double gradient_norm(const ParameterList<double>&);
template double clip_gradient_norm(const ParameterList<float>&, double);
template double clip_gradient_norm(const ParameterList<double>&, double);

}  // namespace motionflow
