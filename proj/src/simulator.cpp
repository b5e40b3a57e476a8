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

#include "motionflow/simulator.hpp"

#include <cmath>
#include <numbers>

namespace motionflow {

void SimConfig::validate() const {
  if (particles < 2) throw ConfigError("simulator needs at least two particles");
  if (!(half_width > 0) || !(dt > 0) || !(radius > 0) || !(repulsion >= 0)) {
    throw ConfigError("simulator half_width, dt and radius must be positive and repulsion non-negative");
  }
  if (!(min_speed >= 0) || !(max_speed >= min_speed)) throw ConfigError("simulator speed range is invalid");
  if (!(spawn_half_width > 0) || spawn_half_width > half_width) {
    throw ConfigError("simulator spawn_half_width must lie in (0, half_width]");
  }
  if (steps < 2) throw ConfigError("simulator steps must be at least 2");
}

std::array<double, 2> repulsion_force(const ParticleState& state, const SimConfig& config) {
  const Particle& free = state.back();
  std::array<double, 2> a{0.0, 0.0};
  for (std::size_t j = 0; j + 1 < state.size(); ++j) {
    const double dx = free[0] - state[j][0], dy = free[1] - state[j][1];
    const double d = std::hypot(dx, dy);
    if (d >= config.radius || d == 0.0) continue;
    const double magnitude = config.repulsion * (1.0 - d / config.radius);
    a[0] += magnitude * dx / d;
    a[1] += magnitude * dy / d;
  }
  return a;
}

ParticleState step_dynamics(const ParticleState& state, const SimConfig& config) {
  ParticleState next = state;
  const std::array<double, 2> a = repulsion_force(state, config);
  next.back()[2] += a[0] * config.dt;
  next.back()[3] += a[1] * config.dt;
  for (Particle& p : next) {
    for (int axis = 0; axis < 2; ++axis) {
      p[axis] += p[axis + 2] * config.dt;
      if (p[axis] > config.half_width) {
        p[axis] = config.half_width;
        p[axis + 2] = -p[axis + 2];
      } else if (p[axis] < -config.half_width) {
        p[axis] = -config.half_width;
        p[axis + 2] = -p[axis + 2];
      }
    }
  }
  return next;
}

ParticleState initial_state(const SimConfig& config, Rng& rng) {
  ParticleState state(std::size_t(config.particles));
  for (Particle& p : state) {
    p[0] = rng.uniform(-config.spawn_half_width, config.spawn_half_width);
    p[1] = rng.uniform(-config.spawn_half_width, config.spawn_half_width);
    const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double speed = rng.uniform(config.min_speed, config.max_speed);
    p[2] = speed * std::cos(heading);
    p[3] = speed * std::sin(heading);
  }
  return state;
}

Tensor<double> rollout(const ParticleState& initial, const SimConfig& config) {
  config.validate();
  if (Index(initial.size()) != config.particles) throw ShapeError("rollout: particle count mismatch");
  Tensor<double> frames({config.steps, config.particles, kParticleFeatures});
  ParticleState state = initial;
  for (Index t = 0; t < config.steps; ++t) {
    if (t > 0) state = step_dynamics(state, config);
    for (Index n = 0; n < config.particles; ++n)
      for (Index f = 0; f < kParticleFeatures; ++f)
        frames[(t * config.particles + n) * kParticleFeatures + f] = state[std::size_t(n)][std::size_t(f)];
  }
  return frames;
}

Tensor<double> simulate_trajectory(const SimConfig& config, Rng& rng) {
  config.validate();
  return rollout(initial_state(config, rng), config);
}

}  // namespace motionflow
