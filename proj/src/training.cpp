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

#include "motionflow/training.hpp"

#include <cmath>
#include <numeric>

namespace motionflow {

template <typename Scalar>
double evaluate_nll(MotionFlowModel<Scalar>& model, const SampleSet& samples, Index batch_size) {
  const Index n = samples.size();
  if (n < 1) throw std::invalid_argument("evaluate_nll: empty sample set");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  double total = 0.0;
  for (Index begin = 0; begin < n; begin += batch_size) {
    const Index end = std::min(n, begin + batch_size);
    const double nll = double(model.nll_value(gather_rows<Scalar>(samples.x, order, begin, end),
                                              gather_rows<Scalar>(samples.y, order, begin, end)));
    total += nll * double(end - begin);
  }
  return total / double(n);
}

template <typename Scalar>
double train_step(MotionFlowModel<Scalar>& model, Adam<Scalar>& optimizer, const Tensor<Scalar>& x,
                  const Tensor<Scalar>& y, double clip_norm, double* grad_norm) {
  model.zero_grad();
  Tape<Scalar> tape;
  const Var<Scalar> loss = model.nll(tape, x, y);
  tape.backward(loss);
  const double norm = clip_gradient_norm(model.parameters(), clip_norm);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  if (grad_norm != nullptr) *grad_norm = norm;
  optimizer.step();
  return double(loss.value()[0]);
}

std::string metrics_line(const EpochMetrics& m) {
  Json j{{"epoch", m.epoch}, {"val_nll", m.val_nll}, {"improved", m.improved}};
  if (m.epoch > 0) {
    j["train_nll"] = m.train_nll;
    j["grad_norm"] = m.grad_norm;
    j["lr"] = m.learning_rate;
  }
  return j.dump();
}

template <typename Scalar>
TrainResult train(MotionFlowModel<Scalar>& model, const SampleSet& train_set, const SampleSet& val_set,
                  const TrainConfig& config, const std::vector<double>& feature_scale, const TrainOutputs& outputs) {
  config.validate();
  const Index n = train_set.size();
  if (n < 1 || val_set.size() < 1) throw std::invalid_argument("train: train and validation sets must be non-empty");

  Adam<Scalar> optimizer(model.parameters(), config.adam);
  Checkpoint best;
  best.feature_scale = feature_scale;
  TrainResult result;

  auto record = [&](const EpochMetrics& m) {
    result.history.push_back(m);
    best.val_history.push_back(m.val_nll);
    if (outputs.metrics_log != nullptr) *outputs.metrics_log << metrics_line(m) << '\n' << std::flush;
    if (outputs.on_epoch) outputs.on_epoch(m);
  };
  auto keep_best = [&](Index epoch) {
    capture_state(model, &optimizer, best);
    best.epoch = epoch;
    best.best_epoch = epoch;
    if (!outputs.checkpoint_path.empty()) save_checkpoint(best, outputs.checkpoint_path);
  };

  EpochMetrics initial;
  initial.val_nll = evaluate_nll(model, val_set, config.batch_size);
  if (!std::isfinite(initial.val_nll)) throw NumericError("non-finite validation NLL at initialization");
  initial.improved = true;
  result.initial_val_nll = result.best_val_nll = initial.val_nll;
  record(initial);
  keep_best(0);

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng = Rng::derive(config.seed, 0x5EED0000ULL + std::uint64_t(epoch));
    for (Index i = n - 1; i > 0; --i) std::swap(order[std::size_t(i)], order[rng.below(std::uint64_t(i + 1))]);

    EpochMetrics m;
    m.epoch = epoch;
    m.learning_rate = optimizer.config().learning_rate;
    Index batches = 0;
    for (Index begin = 0; begin < n; begin += config.batch_size) {
      const Index end = std::min(n, begin + config.batch_size);
      double norm = 0.0;
      const double loss = train_step(model, optimizer, gather_rows<Scalar>(train_set.x, order, begin, end),
                                     gather_rows<Scalar>(train_set.y, order, begin, end), config.clip_norm, &norm);
      m.train_nll += loss * double(end - begin);
      m.grad_norm += norm;
      ++batches;
    }
    m.train_nll /= double(n);
    m.grad_norm /= double(batches);
    m.val_nll = evaluate_nll(model, val_set, config.batch_size);
    if (!std::isfinite(m.val_nll)) throw NumericError("non-finite validation NLL at epoch " + std::to_string(epoch));
    result.epochs_run = epoch;
    if (m.val_nll < result.best_val_nll) {
      m.improved = true;
      result.best_val_nll = m.val_nll;
      result.best_epoch = epoch;
    }
    record(m);
    if (m.improved) keep_best(epoch);
    if (epoch - result.best_epoch > config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  restore_state(best, model, static_cast<Adam<Scalar>*>(nullptr));
  if (!outputs.checkpoint_path.empty()) {
    best.epoch = result.epochs_run;
    save_checkpoint(best, outputs.checkpoint_path);
  }
  return result;
}

#define MOTIONFLOW_INSTANTIATE(S)                                                                             \
  template double evaluate_nll(MotionFlowModel<S>&, const SampleSet&, Index);                                \
  template double train_step(MotionFlowModel<S>&, Adam<S>&, const Tensor<S>&, const Tensor<S>&, double,      \
                             double*);                                                                       \
  template TrainResult train(MotionFlowModel<S>&, const SampleSet&, const SampleSet&, const TrainConfig&,    \
                             const std::vector<double>&, const TrainOutputs&);

MOTIONFLOW_INSTANTIATE(float)
MOTIONFLOW_INSTANTIATE(double)
#undef MOTIONFLOW_INSTANTIATE

}  // namespace motionflow
