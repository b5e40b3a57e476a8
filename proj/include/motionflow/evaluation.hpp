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

#ifndef MOTIONFLOW_EVALUATION_HPP
#define MOTIONFLOW_EVALUATION_HPP

#include "motionflow/dataset.hpp"
#include "motionflow/model.hpp"

#include <array>
#include <vector>

namespace motionflow {

// Published MSE magnitudes on the original particle task at steps 1/15/25,
// reported next to our numbers for context only.
inline constexpr std::array<Index, 3> kReferenceHorizons{1, 15, 25};
inline constexpr std::array<double, 3> kReferenceMse{1.55e-5, 2.88e-4, 4.32e-4};

struct MseReport {
  std::vector<Index> horizons;
  std::vector<double> mse;             // original coordinates
  std::vector<double> mse_normalized;  // divided by the per-feature scale
};

// Feature indices scored by the MSE: x and y when both exist, else all.
std::vector<Index> metric_features(const DatasetManifest& manifest);

// prediction, truth: [n, V, N, D] in original coordinates. Horizon h scores
// predicted step h (1-based), averaged over samples, entities and features.
MseReport mse_at_horizons(const Tensor<double>& prediction, const Tensor<double>& truth,
                          const std::vector<Index>& horizons, const std::vector<Index>& features,
                          const std::vector<double>& scale);

// Linear extrapolation of the last two input frames for the given features;
// other features keep their last observed value. inputs: [n, U, N, D].
Tensor<double> constant_velocity_baseline(const Tensor<double>& inputs, Index output_steps,
                                          const std::vector<Index>& features);

// Predictions for a raw split [n, U + V, N, D], returned denormalized as
// [n, V, N, D].
template <typename Scalar>
Tensor<double> predict_frames(MotionFlowModel<Scalar>& model, const Tensor<double>& raw_frames,
                              const std::vector<double>& scale, const PredictOptions& options, Index batch_size);

template <typename Scalar>
MseReport evaluate_mse(MotionFlowModel<Scalar>& model, const TrajectoryDataset& dataset, Split split,
                       const std::vector<Index>& horizons, const PredictOptions& options, Index batch_size = 100);

MseReport evaluate_baseline(const TrajectoryDataset& dataset, Split split, const std::vector<Index>& horizons);

}  // namespace motionflow

#endif  // MOTIONFLOW_EVALUATION_HPP
