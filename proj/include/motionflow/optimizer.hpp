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

#ifndef MOTIONFLOW_OPTIMIZER_HPP
#define MOTIONFLOW_OPTIMIZER_HPP

#include "motionflow/layers.hpp"

#include <cstdint>

namespace motionflow {

struct AdamConfig {
  double learning_rate = 1e-3;
  double weight_decay = 5e-4;  // decoupled: w <- w * (1 - lr * wd) before the step
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias-corrected moments and decoupled weight decay. Frozen
// parameters (trainable() == false) are skipped.
template <typename Scalar>
class Adam {
 public:
  Adam(ParameterList<Scalar> params, AdamConfig config);

  // Applies one update from the gradients currently stored in the parameters.
  void step();

  std::uint64_t step_count() const { return steps_; }
  void set_step_count(std::uint64_t steps) { steps_ = steps; }
  std::vector<Tensor<Scalar>>& first_moments() { return m_; }
  std::vector<Tensor<Scalar>>& second_moments() { return v_; }
  const std::vector<Tensor<Scalar>>& first_moments() const { return m_; }
  const std::vector<Tensor<Scalar>>& second_moments() const { return v_; }
  const ParameterList<Scalar>& parameters() const { return params_; }
  const AdamConfig& config() const { return config_; }

 private:
  ParameterList<Scalar> params_;
  AdamConfig config_;
  std::vector<Tensor<Scalar>> m_, v_;
  std::uint64_t steps_ = 0;
};

// Global L2 norm of all gradients.
template <typename Scalar>
double gradient_norm(const ParameterList<Scalar>& params);

// Rescales gradients so their global norm is at most max_norm (<= 0 disables
// clipping). Returns the norm before clipping.
template <typename Scalar>
double clip_gradient_norm(const ParameterList<Scalar>& params, double max_norm);

}  // namespace motionflow

#endif  // MOTIONFLOW_OPTIMIZER_HPP
