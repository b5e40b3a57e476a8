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

#ifndef MOTIONFLOW_MODEL_CONFIG_HPP
#define MOTIONFLOW_MODEL_CONFIG_HPP

#include "motionflow/tensor.hpp"

#include <cstdint>

namespace motionflow {

inline constexpr Index kSqueezeFactor = 4;

// Architecture and geometry. A frame of N entities with D features is
// flattened entity-major into a [1, 1, F] row (F = N*D rounded up to a
// multiple of 4, extra columns are padding) and squeezed to
// [4, 1, F/4]; input frames are squeezed the same way and stacked over time,
// so the conditioner grid is [4, U, F/4]. For D = 4 the squeezed channels are
// exactly the per-entity features.
struct ModelConfig {
  Index input_steps = 10;   // U
  Index output_steps = 25;  // V
  Index entities = 3;       // N
  Index features = 4;       // D
  Index flow_steps = 8;     // K

  Index arn_hidden1 = 32;
  Index arn_hidden2 = 16;
  Index arn_dilation = 2;
  Index fc_hidden = 64;
  Index cnn1_hidden = 8;
  Index cnn2_hidden = 128;
  Index prior_hidden = 64;
  Index plain_conditioner_channels = 256;

  double pono_epsilon = 1e-5;
  double scale_bound = 1.9;
  double log_sigma_bound = 7.0;

  bool use_masked_conditioner = true;  // ablation component A
  bool use_dynamic_prior = true;       // ablation component B
  bool use_residual_net = true;        // ablation component C

  std::uint64_t seed = 0;

  Index frame_width() const {
    const Index raw = entities * features;
    return (raw + kSqueezeFactor - 1) / kSqueezeFactor * kSqueezeFactor;
  }
  Index padding() const { return frame_width() - entities * features; }
  Index latent_channels() const { return kSqueezeFactor; }  // C_y
  Index latent_width() const { return frame_width() / kSqueezeFactor; }  // N_f
  Index input_channels() const { return kSqueezeFactor; }  // C_x
  Index frame_dims() const { return latent_channels() * latent_width(); }

  void validate() const {
    if (input_steps < 1 || output_steps < 1 || entities < 1 || features < 1 || flow_steps < 1) {
      throw ConfigError("model geometry and flow_steps must be positive");
    }
    if (latent_channels() % 4 != 0) throw ConfigError("latent channel count must be divisible by 4");
    if (arn_hidden1 < 1 || arn_hidden2 < 1 || fc_hidden < 1 || cnn1_hidden < 1 || cnn2_hidden < 1 ||
        prior_hidden < 1 || plain_conditioner_channels < 1 || arn_dilation < 1) {
      throw ConfigError("layer widths and dilation must be positive");
    }
    if (!(pono_epsilon > 0) || !(scale_bound > 0) || !(log_sigma_bound > 0)) {
      throw ConfigError("pono_epsilon, scale_bound and log_sigma_bound must be positive");
    }
    if (use_residual_net && !use_dynamic_prior) {
      throw ConfigError("use_residual_net requires use_dynamic_prior");
    }
  }
};

}  // namespace motionflow

#endif  // MOTIONFLOW_MODEL_CONFIG_HPP
