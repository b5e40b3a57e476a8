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

#ifndef MOTIONFLOW_PLOT_HPP
#define MOTIONFLOW_PLOT_HPP

#include "motionflow/tensor.hpp"

#include <array>
#include <string>
#include <vector>

namespace motionflow {

// Maps data coordinates onto an SVG viewBox [0, width] x [0, height] with
// the y axis pointing up. The data box [min, max] fills the area inside the
// margin.
struct ViewTransform {
  double min_x = -1, min_y = -1, max_x = 1, max_y = 1;
  double width = 640, height = 640, margin = 0;

  std::array<double, 2> apply(double x, double y) const;
};

// Square data box around all points, padded by 5%.
ViewTransform fit_view(const std::vector<std::array<double, 2>>& points, double width, double height, double margin);

struct PlotOptions {
  Index x_feature = 0;
  Index y_feature = 1;
  double width = 640;
  double height = 640;
  double margin = 48;
  std::string title;
};

// ground_truth: [T, N, D] observed plus future frames; prediction: [V, N, D]
// for the last V frames. Ground truth is drawn as a polyline with solid
// circles, predictions as semi-transparent squares, one group per entity.
std::string render_svg(const Tensor<double>& ground_truth, const Tensor<double>& prediction,
                       const PlotOptions& options = {});
void plot_svg(const Tensor<double>& ground_truth, const Tensor<double>& prediction, const std::string& path,
              const PlotOptions& options = {});

}  // namespace motionflow

#endif  // MOTIONFLOW_PLOT_HPP
