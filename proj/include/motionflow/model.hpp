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

#ifndef MOTIONFLOW_MODEL_HPP
#define MOTIONFLOW_MODEL_HPP

#include "motionflow/conditioner.hpp"
#include "motionflow/flow.hpp"
#include "motionflow/prior.hpp"

#include <cstdint>

namespace motionflow {

enum class PredictMode { kMean, kSample, kAverage };

struct PredictOptions {
  PredictMode mode = PredictMode::kMean;
  double temperature = 0.7;  // ignored in mean mode
  Index samples = 10;        // average mode only
  std::uint64_t seed = 0;    // sample s of average mode uses seed + s
};

// Frames are normalized, padded rows: x is [B, U, F] and y is [B, V, F]
// with F = ModelConfig::frame_width().

// [B, U, F] -> conditioner grid [B, 4, U, F / 4]; every frame is squeezed
// exactly like the flow squeezes output frames.
template <typename Scalar>
Tensor<Scalar> conditioner_grid(const Tensor<Scalar>& x);

template <typename Scalar>
class MotionFlowModel {
 public:
  explicit MotionFlowModel(const ModelConfig& config);
  MotionFlowModel(const MotionFlowModel&) = delete;
  MotionFlowModel& operator=(const MotionFlowModel&) = delete;

  const ModelConfig& config() const { return config_; }

  // Every parameter in a fixed order; names are unique.
  const ParameterList<Scalar>& parameters() const { return parameters_; }
  Index parameter_count() const;
  void zero_grad();

  ConditioningBundle<Scalar> condition(Tape<Scalar>& tape, const Tensor<Scalar>& x);

  // Latents [B, C_y, 1, N_f] of the last and second-to-last input frames,
  // which seed the prior contexts; empty for the static prior.
  std::vector<Var<Scalar>> observed_latents(Tape<Scalar>& tape, const Tensor<Scalar>& x,
                                            const ConditioningBundle<Scalar>& bundle);

  // Negative log-likelihood in nats per output dimension, averaged over the
  // batch, as [1]. A non-finite result throws NumericError naming the first
  // non-finite intermediate.
  Var<Scalar> nll(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& y);
  Scalar nll_value(const Tensor<Scalar>& x, const Tensor<Scalar>& y);

  // Latents [B * V, C_y, 1, N_f] of y and the inverse map.
  Tensor<Scalar> encode(const Tensor<Scalar>& x, const Tensor<Scalar>& y);
  Tensor<Scalar> decode(const Tensor<Scalar>& x, const Tensor<Scalar>& latents);

  // Autoregressive prediction of [B, V, F].
  Tensor<Scalar> predict(const Tensor<Scalar>& x, const PredictOptions& options);

  Conditioner<Scalar>& conditioner() { return conditioner_; }
  Flow<Scalar>& flow() { return flow_; }
  Prior<Scalar>& prior() { return prior_; }

 private:
  Tensor<Scalar> predict_once(const Tensor<Scalar>& x, double temperature, std::uint64_t seed);
  void check_batch(const Tensor<Scalar>& t, Index steps, const char* what) const;
  [[noreturn]] void diagnose(const std::vector<std::pair<std::string, Var<Scalar>>>& stages) const;

  ModelConfig config_;
  Rng conditioner_rng_, flow_rng_, prior_rng_;
  Conditioner<Scalar> conditioner_;
  Flow<Scalar> flow_;
  Prior<Scalar> prior_;
  ParameterList<Scalar> parameters_;
};

}  // namespace motionflow

#endif  // MOTIONFLOW_MODEL_HPP
