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

#ifndef MOTIONFLOW_TRAINING_HPP
#define MOTIONFLOW_TRAINING_HPP

#include "motionflow/checkpoint.hpp"
#include "motionflow/config.hpp"

#include <functional>
#include <ostream>
#include <string>

namespace motionflow {

struct EpochMetrics {
  Index epoch = 0;  // 0 is the evaluation before any update
  double train_nll = 0.0;
  double val_nll = 0.0;
  double grad_norm = 0.0;  // mean pre-clipping norm over the epoch's batches
  double learning_rate = 0.0;  // rate used during the epoch
  bool improved = false;
};

struct TrainResult {
  double initial_val_nll = 0.0;
  double best_val_nll = 0.0;
  Index best_epoch = 0;
  Index epochs_run = 0;
  bool stopped_early = false;
  std::vector<EpochMetrics> history;
};

struct TrainOutputs {
  std::string checkpoint_path;            // best checkpoint, rewritten on improvement
  std::ostream* metrics_log = nullptr;    // one JSON object per epoch and line
  std::function<void(const EpochMetrics&)> on_epoch;
};

// Mean NLL (nats per dimension) over a sample set.
template <typename Scalar>
double evaluate_nll(MotionFlowModel<Scalar>& model, const SampleSet& samples, Index batch_size);

// One optimization step on a batch; returns the batch NLL.
template <typename Scalar>
double train_step(MotionFlowModel<Scalar>& model, Adam<Scalar>& optimizer, const Tensor<Scalar>& x,
                  const Tensor<Scalar>& y, double clip_norm, double* grad_norm = nullptr);

// Epoch loop with shuffled mini-batches and early stopping. The model ends
// holding the parameters of the best validation epoch.
template <typename Scalar>
TrainResult train(MotionFlowModel<Scalar>& model, const SampleSet& train_set, const SampleSet& val_set,
                  const TrainConfig& config, const std::vector<double>& feature_scale, const TrainOutputs& outputs);

std::string metrics_line(const EpochMetrics& m);

}  // namespace motionflow

#endif  // MOTIONFLOW_TRAINING_HPP
