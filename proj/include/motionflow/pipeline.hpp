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

#ifndef MOTIONFLOW_PIPELINE_HPP
#define MOTIONFLOW_PIPELINE_HPP

#include "motionflow/checkpoint.hpp"
#include "motionflow/config.hpp"
#include "motionflow/evaluation.hpp"
#include "motionflow/training.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace motionflow {

// File names inside a run directory.
inline constexpr const char* kCheckpointFile = "checkpoint.mfck";
inline constexpr const char* kMetricsFile = "metrics.jsonl";

// Simulated trajectories or csv windows, depending on config.data.source.
TrajectoryDataset build_dataset(const RunConfig& config);

// Reads a stored dataset and checks its geometry against the config.
TrajectoryDataset load_dataset(const std::string& dir, const RunConfig& config);

ModelConfig model_config_for(const RunConfig& config, const TrajectoryDataset& data);

// Trains a fresh model and writes the best checkpoint and the metrics log
// into out_dir. `progress` receives one human-readable line per epoch.
template <typename Scalar>
TrainResult train_run(const RunConfig& config, const TrajectoryDataset& data, const std::string& out_dir,
                      std::ostream* progress = nullptr);

template <typename Scalar>
std::unique_ptr<MotionFlowModel<Scalar>> model_from_checkpoint(const Checkpoint& checkpoint);

struct EvalReport {
  std::string split;
  PredictOptions options;
  MseReport model;
  MseReport baseline;
};

template <typename Scalar>
EvalReport evaluate_run(MotionFlowModel<Scalar>& model, const TrajectoryDataset& data, Split split,
                        const std::vector<Index>& horizons, const PredictOptions& options);

Json to_json(const EvalReport& report);
std::string format_eval_table(const EvalReport& report);

struct AblationVariant {
  std::string name;
  bool masked_conditioner = false;  // A
  bool dynamic_prior = false;       // B
  bool residual_net = false;        // C
};

// -A, A-only, AB, ABC.
std::vector<AblationVariant> ablation_variants();

struct AblationRow {
  AblationVariant variant;
  Index parameters = 0;
  double initial_val_nll = 0.0;
  double final_val_nll = 0.0;  // after the last epoch
  double best_val_nll = 0.0;
};

// Settings for the ablation grid: four particles with four features (one
// squeezed frame [4, 1, 4]), K = 2, U = V = 3 and five epochs.
RunConfig ablation_config(std::uint64_t seed);

// Trains every variant from the same seed on the same data. Each variant's
// metrics log and checkpoint go to out_dir/<name> when out_dir is set.
template <typename Scalar>
std::vector<AblationRow> run_ablation(const RunConfig& config, const TrajectoryDataset& data,
                                      const std::string& out_dir = {}, std::ostream* progress = nullptr);

Json to_json(const AblationRow& row);

}  // namespace motionflow

#endif  // MOTIONFLOW_PIPELINE_HPP
