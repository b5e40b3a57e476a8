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

#include "motionflow/evaluation.hpp"

#include <algorithm>
#include <numeric>

namespace motionflow {

std::vector<Index> metric_features(const DatasetManifest& manifest) {
  const auto& names = manifest.feature_names;
  const auto x = std::find(names.begin(), names.end(), "x");
  const auto y = std::find(names.begin(), names.end(), "y");
  if (x != names.end() && y != names.end()) return {Index(x - names.begin()), Index(y - names.begin())};
  std::vector<Index> all(names.size());
  std::iota(all.begin(), all.end(), Index(0));
  return all;
}

MseReport mse_at_horizons(const Tensor<double>& prediction, const Tensor<double>& truth,
                          const std::vector<Index>& horizons, const std::vector<Index>& features,
                          const std::vector<double>& scale) {
  require_rank(prediction, 4, "mse prediction");
  if (prediction.shape() != truth.shape()) throw ShapeError("mse: prediction and truth shapes differ");
  const Index n = prediction.dim(0), steps = prediction.dim(1), entities = prediction.dim(2), d = prediction.dim(3);
  if (n < 1) throw std::invalid_argument("mse: empty dataset");
  if (features.empty()) throw std::invalid_argument("mse: no features to score");
  if (Index(scale.size()) != d) throw ShapeError("mse: scale length does not match feature count");
  MseReport report;
  report.horizons = horizons;
  for (Index h : horizons) {
    if (h < 1 || h > steps) throw std::invalid_argument("mse: horizon " + std::to_string(h) + " out of range");
    double sum = 0.0, sum_normalized = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index e = 0; e < entities; ++e)
        for (Index f : features) {
          const Index at = ((i * steps + h - 1) * entities + e) * d + f;
          const double err = prediction[at] - truth[at];
          sum += err * err;
          const double err_n = err / scale[std::size_t(f)];
          sum_normalized += err_n * err_n;
        }
    const double count = double(n * entities * Index(features.size()));
    report.mse.push_back(sum / count);
    report.mse_normalized.push_back(sum_normalized / count);
  }
  return report;
}

Tensor<double> constant_velocity_baseline(const Tensor<double>& inputs, Index output_steps,
                                          const std::vector<Index>& features) {
  require_rank(inputs, 4, "baseline inputs");
  const Index n = inputs.dim(0), u = inputs.dim(1), entities = inputs.dim(2), d = inputs.dim(3);
  Tensor<double> out({n, output_steps, entities, d});
  for (Index i = 0; i < n; ++i)
    for (Index e = 0; e < entities; ++e)
      for (Index f = 0; f < d; ++f) {
        const double last = inputs[((i * u + u - 1) * entities + e) * d + f];
        const double prev = u > 1 ? inputs[((i * u + u - 2) * entities + e) * d + f] : last;
        const bool moving = std::find(features.begin(), features.end(), f) != features.end();
        for (Index h = 1; h <= output_steps; ++h) {
          out[((i * output_steps + h - 1) * entities + e) * d + f] = moving ? last + double(h) * (last - prev) : last;
        }
      }
  return out;
}

template <typename Scalar>
Tensor<double> predict_frames(MotionFlowModel<Scalar>& model, const Tensor<double>& raw_frames,
                              const std::vector<double>& scale, const PredictOptions& options, Index batch_size) {
  const ModelConfig& c = model.config();
  require_shape(raw_frames, {raw_frames.dim(0), c.input_steps + c.output_steps, c.entities, c.features},
                "prediction input frames");
  const SampleSet samples = make_samples(normalize(raw_frames, scale), c.input_steps);
  const Index n = samples.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  Tensor<double> rows({n, c.output_steps, c.frame_width()});
  const Index per = c.output_steps * c.frame_width();
  for (Index begin = 0; begin < n; begin += batch_size) {
    const Index end = std::min(n, begin + batch_size);
    const Tensor<Scalar> pred = model.predict(gather_rows<Scalar>(samples.x, order, begin, end), options);
    rows.array().segment(begin * per, (end - begin) * per) = pred.array().template cast<double>();
  }
  return denormalize(rows_to_frames(rows, c.entities, c.features), scale);
}

template <typename Scalar>
MseReport evaluate_mse(MotionFlowModel<Scalar>& model, const TrajectoryDataset& dataset, Split split,
                       const std::vector<Index>& horizons, const PredictOptions& options, Index batch_size) {
  const Tensor<double> frames = dataset.split(split);
  const Index u = dataset.manifest.input_steps, v = dataset.manifest.output_steps;
  const Tensor<double> prediction = predict_frames(model, frames, dataset.manifest.scale, options, batch_size);
  return mse_at_horizons(prediction, narrow_tensor(frames, 1, u, v), horizons, metric_features(dataset.manifest),
                         dataset.manifest.scale);
}

MseReport evaluate_baseline(const TrajectoryDataset& dataset, Split split, const std::vector<Index>& horizons) {
  const Tensor<double> frames = dataset.split(split);
  const Index u = dataset.manifest.input_steps, v = dataset.manifest.output_steps;
  const std::vector<Index> features = metric_features(dataset.manifest);
  const Tensor<double> prediction = constant_velocity_baseline(narrow_tensor(frames, 1, 0, u), v, features);
  return mse_at_horizons(prediction, narrow_tensor(frames, 1, u, v), horizons, features, dataset.manifest.scale);
}

#define MOTIONFLOW_INSTANTIATE(S)                                                                              \
  template Tensor<double> predict_frames(MotionFlowModel<S>&, const Tensor<double>&, const std::vector<double>&, \
                                         const PredictOptions&, Index);                                         \
  template MseReport evaluate_mse(MotionFlowModel<S>&, const TrajectoryDataset&, Split,                         \
                                  const std::vector<Index>&, const PredictOptions&, Index);

MOTIONFLOW_INSTANTIATE(float)
MOTIONFLOW_INSTANTIATE(double)
#undef MOTIONFLOW_INSTANTIATE

}  // namespace motionflow
