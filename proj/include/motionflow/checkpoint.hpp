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

#ifndef MOTIONFLOW_CHECKPOINT_HPP
#define MOTIONFLOW_CHECKPOINT_HPP

#include "motionflow/model.hpp"
#include "motionflow/optimizer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace motionflow {

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Container layout: the 8 magic bytes "MFCKPT01", the manifest length as a
// little-endian uint64, the JSON manifest, then every tensor payload as
// little-endian float64 in manifest order (parameters, first moments,
// second moments).
struct Checkpoint {
  ModelConfig model;
  std::string precision = "f64";
  std::int64_t epoch = 0;
  std::int64_t best_epoch = 0;
  std::uint64_t optimizer_steps = 0;
  std::vector<double> val_history;
  std::vector<double> feature_scale;
  std::vector<TensorRecord> parameters;
  std::vector<TensorRecord> first_moments;
  std::vector<TensorRecord> second_moments;
};

inline constexpr char kCheckpointMagic[9] = "MFCKPT01";

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies model parameters (and optimizer state when given) into records.
template <typename Scalar>
void capture_state(const MotionFlowModel<Scalar>& model, const Adam<Scalar>* optimizer, Checkpoint& out);

// Loads parameters (and optimizer state when given) by name; names and
// shapes must match exactly.
template <typename Scalar>
void restore_state(const Checkpoint& checkpoint, MotionFlowModel<Scalar>& model, Adam<Scalar>* optimizer);

}  // namespace motionflow

#endif  // MOTIONFLOW_CHECKPOINT_HPP
