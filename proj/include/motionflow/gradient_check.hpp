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

#ifndef MOTIONFLOW_GRADIENT_CHECK_HPP
#define MOTIONFLOW_GRADIENT_CHECK_HPP

#include "motionflow/autodiff.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace motionflow {

struct GradientCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-3;
  // 0 checks every coordinate; otherwise a seeded random subset of this size.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Index worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t coordinates_checked = 0;
  bool passed = true;

  std::string summary() const;
};

using ScalarLoss = std::function<Var<double>(Tape<double>&)>;

// Compares backward-pass gradients of a scalar loss against central finite
// differences. Only meaningful in 64-bit precision.
GradientCheckReport gradient_check(const ScalarLoss& loss, const std::vector<Parameter<double>*>& params,
                                   const GradientCheckOptions& options = {});

}  // namespace motionflow

#endif  // MOTIONFLOW_GRADIENT_CHECK_HPP
