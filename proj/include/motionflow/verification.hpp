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

#ifndef MOTIONFLOW_VERIFICATION_HPP
#define MOTIONFLOW_VERIFICATION_HPP

#include "motionflow/gradient_check.hpp"
#include "motionflow/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace motionflow {

// Oracle suites shared by the `verify` command and the test binaries.
struct SuiteResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // the measured quantity (error, influence, ...)
  double threshold = 0.0;  // pass bound on `value`
  std::string detail;
};

// Small geometry for oracles: U = V = 3, four entities with four features
// (squeezed frame [4, 1, 4]) and two flow steps.
ModelConfig tiny_model_config();

// Overwrites every parameter with scale * N(0, 1 / fan) draws so that
// zero-initialized heads take part in the test.
template <typename Scalar>
void randomize_parameters(const ParameterList<Scalar>& params, Rng& rng, double scale);

// Rows [batch, steps, width] uniform in [-scale, scale]; with the default
// scale they cover the range of max-abs normalized data.
template <typename Scalar>
Tensor<Scalar> random_rows(Index batch, Index steps, Index width, Rng& rng, double scale = 1.0);

// Max |decode(encode(y)) - y| over `trials` random inputs and parameter
// draws, C_y = 4, N_f in {2, 4}, K in {1, 2, 8}.
SuiteResult bijectivity_suite(bool single_precision, Index trials, std::uint64_t seed);

// Flow log-determinant against log|det J| of a central-difference Jacobian
// of a single frame (dimension <= 16, K <= 2), worst relative error.
SuiteResult logdet_suite(Index draws, std::uint64_t seed);

// Largest output change of either ARN trunk caused by perturbing a cell that
// is not allowed to influence it, over all grids up to max_grid x max_grid.
// Also fails when allowed cells never have any influence.
SuiteResult autoregressivity_suite(Index max_grid, std::uint64_t seed);

// Full-model NLL gradient against central differences at 64-bit.
SuiteResult gradient_suite(std::size_t coordinates, std::uint64_t seed);

// |nll - closed-form standard-normal NLL| for a freshly built model on the
// given normalized rows.
template <typename Scalar>
SuiteResult initialization_suite(const ModelConfig& config, const Tensor<double>& x, const Tensor<double>& y);

// Component-level round trips: squeeze, actnorm, mixing, coupling, each in
// both directions at 64-bit.
SuiteResult component_roundtrip_suite(std::uint64_t seed);

std::vector<SuiteResult> run_oracle_suites(std::uint64_t seed);

}  // namespace motionflow

#endif  // MOTIONFLOW_VERIFICATION_HPP
