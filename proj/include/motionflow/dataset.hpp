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

#ifndef MOTIONFLOW_DATASET_HPP
#define MOTIONFLOW_DATASET_HPP

#include "motionflow/simulator.hpp"

#include <string>
#include <vector>

namespace motionflow {

inline constexpr double kScaleFloor = 1e-8;

enum class Split { kTrain, kVal, kTest };

struct SplitCounts {
  Index train = 1000;
  Index val = 100;
  Index test = 100;
  Index total() const { return train + val + test; }
};

// Stored alongside the trajectories. Samples are ordered train, val, test.
struct DatasetManifest {
  SplitCounts counts;
  Index input_steps = 10;
  Index output_steps = 25;
  Index entities = 3;
  std::vector<std::string> feature_names{"x", "y", "vx", "vy"};
  std::vector<double> scale;  // per feature, from the training split
  SimConfig simulator;

  Index features() const { return Index(feature_names.size()); }
  Index steps() const { return input_steps + output_steps; }
};

// Raw (unnormalized) trajectories [samples, steps, entities, features].
struct TrajectoryDataset {
  DatasetManifest manifest;
  Tensor<double> frames;

  Index offset(Split split) const;
  Index count(Split split) const;
  Tensor<double> split(Split which) const;
};

// Independent rollouts; sample i draws from Rng::derive(sim.seed, i).
TrajectoryDataset generate_dataset(const SimConfig& sim, SplitCounts counts, Index input_steps, Index output_steps);

// Per-feature max(|value|) over [..., features] data, floored at 1e-8.
std::vector<double> normalize_stats(const Tensor<double>& frames);
Tensor<double> normalize(const Tensor<double>& frames, const std::vector<double>& scale);
Tensor<double> denormalize(const Tensor<double>& frames, const std::vector<double>& scale);

// Writes manifest.json and trajectories.csv into `dir` (created if needed).
void write_dataset(const TrajectoryDataset& dataset, const std::string& dir);
TrajectoryDataset read_dataset(const std::string& dir);

// Model-ready rows: every frame flattened entity-major and zero-padded to
// `width` columns. x: [n, U, width], y: [n, V, width], normalized.
struct SampleSet {
  Tensor<double> x;
  Tensor<double> y;
  Index size() const { return x.empty() ? 0 : x.dim(0); }
};

Index padded_width(Index entities, Index features);
SampleSet make_samples(const Tensor<double>& normalized_frames, Index input_steps);
// Rows [n, S, width] back to frames [n, S, entities, features].
Tensor<double> rows_to_frames(const Tensor<double>& rows, Index entities, Index features);

// Gathers samples idx[begin, end) as a batch at the requested precision.
template <typename Scalar>
Tensor<Scalar> gather_rows(const Tensor<double>& rows, const std::vector<Index>& idx, Index begin, Index end);

}  // namespace motionflow

#endif  // MOTIONFLOW_DATASET_HPP
