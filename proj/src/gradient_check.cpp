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

#include "motionflow/gradient_check.hpp"

#include "motionflow/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace motionflow {

std::string GradientCheckReport::summary() const {
  std::ostringstream out;
  out << (passed ? "PASS" : "FAIL") << ": " << coordinates_checked << " coordinates, max relative error "
      << max_relative_error;
  if (!worst_parameter.empty()) {
    out << " at " << worst_parameter << "[" << worst_index << "] (analytic " << analytic_at_worst << ", numeric "
        << numeric_at_worst << ")";
  }
  return out.str();
}

namespace {

double evaluate(const ScalarLoss& loss) {
  Tape<double> tape;
  return loss(tape).value()[0];
}

}  // namespace

GradientCheckReport gradient_check(const ScalarLoss& loss, const std::vector<Parameter<double>*>& params,
                                   const GradientCheckOptions& options) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape;
    const Var<double> root = loss(tape);
    tape.backward(root);
  }

  std::vector<std::pair<std::size_t, Index>> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (Index i = 0; i < params[p]->value().size(); ++i) coords.emplace_back(p, i);
  if (options.max_coordinates > 0 && coords.size() > options.max_coordinates) {
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.max_coordinates; ++i) {
      std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
    }
    coords.resize(options.max_coordinates);
  }

  GradientCheckReport report;
  for (const auto& [p, i] : coords) {
    Parameter<double>& param = *params[p];
    const double original = param.value()[i];
    param.value()[i] = original + options.step;
    const double plus = evaluate(loss);
    param.value()[i] = original - options.step;
    const double minus = evaluate(loss);
    param.value()[i] = original;

    const double numeric = (plus - minus) / (2.0 * options.step);
    const double analytic = param.grad()[i];
    const double scale = std::max({std::abs(analytic), std::abs(numeric), options.floor});
    double rel = std::abs(analytic - numeric) / scale;
    if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
    ++report.coordinates_checked;
    if (rel > report.max_relative_error || report.worst_index < 0) {
      report.max_relative_error = rel;
      report.worst_parameter = param.name();
      report.worst_index = i;
      report.analytic_at_worst = analytic;
      report.numeric_at_worst = numeric;
    }
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace motionflow
