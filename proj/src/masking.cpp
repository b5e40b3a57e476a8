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

#include "motionflow/masking.hpp"

#include "motionflow/ops.hpp"

#include <algorithm>

namespace motionflow {

Ordering::Ordering(Index steps, Index entities, std::vector<Index> ranks)
    : steps_(steps), entities_(entities), ranks_(std::move(ranks)) {
  if (steps < 1 || entities < 1) throw ShapeError("ordering grid must be at least 1x1");
  if (Index(ranks_.size()) != steps * entities) throw ShapeError("ordering needs one rank per grid cell");
  std::vector<bool> seen(ranks_.size(), false);
  for (Index r : ranks_) {
    if (r < 0 || r >= Index(ranks_.size()) || seen[std::size_t(r)]) {
      throw ShapeError("ordering ranks must be a permutation of 0..cells-1");
    }
    seen[std::size_t(r)] = true;
  }
}

Ordering generate_ordering(OrderingKind kind, Index steps, Index entities) {
  if (steps < 1 || entities < 1) throw ShapeError("ordering grid must be at least 1x1");
  std::vector<Index> ranks(std::size_t(steps * entities));
  Index next = 0;
  if (kind == OrderingKind::kTimeMajorSCurve) {
    for (Index t = 0; t < steps; ++t)
      for (Index i = 0; i < entities; ++i) {
        const Index n = t % 2 == 0 ? i : entities - 1 - i;
        ranks[std::size_t(t * entities + n)] = next++;
      }
  } else {
    for (Index n = 0; n < entities; ++n)
      for (Index i = 0; i < steps; ++i) {
        const Index t = n % 2 == 0 ? i : steps - 1 - i;
        ranks[std::size_t(t * entities + n)] = next++;
      }
  }
  return Ordering(steps, entities, std::move(ranks));
}

LocalMaskSet::LocalMaskSet(Index steps, Index entities, Index kernel, Index dilation, bool inclusive,
                           std::vector<std::uint8_t> masks)
    : steps_(steps), entities_(entities), kernel_(kernel), dilation_(dilation), inclusive_(inclusive),
      masks_(std::move(masks)) {
  if (Index(masks_.size()) != steps * entities * kernel * kernel) {
    throw ShapeError("mask set size does not match grid and kernel");
  }
}

LocalMaskSet build_mask_set(const Ordering& ordering, Index kernel, Index dilation, bool inclusive) {
  if (kernel < 1 || kernel % 2 == 0) throw ShapeError("mask kernel size must be odd");
  if (dilation < 1) throw ShapeError("mask dilation must be >= 1");
  const Index steps = ordering.steps(), entities = ordering.entities(), half = kernel / 2;
  std::vector<std::uint8_t> masks(std::size_t(steps * entities * kernel * kernel), 0);
  for (Index t = 0; t < steps; ++t)
    for (Index n = 0; n < entities; ++n) {
      const Index own = ordering.rank(t, n);
      for (Index ky = 0; ky < kernel; ++ky)
        for (Index kx = 0; kx < kernel; ++kx) {
          const Index tt = t + (ky - half) * dilation, nn = n + (kx - half) * dilation;
          if (tt < 0 || tt >= steps || nn < 0 || nn >= entities) continue;
          const Index other = ordering.rank(tt, nn);
          const bool visible = inclusive ? other <= own : other < own;
          masks[std::size_t(((t * entities + n) * kernel + ky) * kernel + kx)] = visible ? 1 : 0;
        }
    }
  return LocalMaskSet(steps, entities, kernel, dilation, inclusive, std::move(masks));
}

template <typename Scalar>
Var<Scalar> lmconv(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias,
                   const LocalMaskSet& masks) {
  const Index h = input.dim(input.rank() - 2), w = input.dim(input.rank() - 1);
  if (h != masks.steps() || w != masks.entities()) {
    throw ShapeError("lmconv: input grid " + std::to_string(h) + "x" + std::to_string(w) +
                     " does not match mask grid " + std::to_string(masks.steps()) + "x" +
                     std::to_string(masks.entities()));
  }
  if (weight.rank() != 4 || weight.dim(2) != masks.kernel()) {
    throw ShapeError("lmconv: weight kernel does not match mask kernel");
  }
  return conv2d(input, weight, bias, int(masks.dilation()), masks.data());
}

template Var<float> lmconv(const Var<float>&, const Var<float>&, const Var<float>&, const LocalMaskSet&);
template Var<double> lmconv(const Var<double>&, const Var<double>&, const Var<double>&, const LocalMaskSet&);

}  // namespace motionflow
