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

#ifndef MOTIONFLOW_SIMULATOR_HPP
#define MOTIONFLOW_SIMULATOR_HPP

#include "motionflow/random.hpp"
#include "motionflow/tensor.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace motionflow {

inline constexpr Index kParticleFeatures = 4;  // x, y, vx, vy

// Interacting particles in the square arena [-half_width, half_width]^2.
// All particles but the last move at a fixed velocity; the last one is
// pushed away from any other particle closer than `radius`.
struct SimConfig {
  Index particles = 3;
  double half_width = 5.0;
  double dt = 0.1;
  double repulsion = 5.0;  // k_rep
  double radius = 1.0;
  double min_speed = 0.2;
  double max_speed = 1.0;
  double spawn_half_width = 2.5;  // initial positions uniform in this square
  Index steps = 35;
  std::uint64_t seed = 0;

  void validate() const;
};

using Particle = std::array<double, kParticleFeatures>;
using ParticleState = std::vector<Particle>;

// Acceleration acting on the free particle.
std::array<double, 2> repulsion_force(const ParticleState& state, const SimConfig& config);

// Semi-implicit Euler step (v += a dt, p += v dt) with reflecting walls.
ParticleState step_dynamics(const ParticleState& state, const SimConfig& config);

ParticleState initial_state(const SimConfig& config, Rng& rng);

// frames [steps, particles, 4]; frame 0 is the initial state.
Tensor<double> rollout(const ParticleState& initial, const SimConfig& config);
Tensor<double> simulate_trajectory(const SimConfig& config, Rng& rng);

}  // namespace motionflow

#endif  // MOTIONFLOW_SIMULATOR_HPP
