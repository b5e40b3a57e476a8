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

#ifndef MOTIONFLOW_MASKING_HPP
#define MOTIONFLOW_MASKING_HPP

#include "motionflow/autodiff.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace motionflow {

// Visit order over a (time x entity) grid. Cell (t, n) may only see cells
// of lower rank.
class Ordering {
 public:
  Ordering(Index steps, Index entities, std::vector<Index> ranks);

  Index steps() const { return steps_; }
  Index entities() const { return entities_; }
  Index cells() const { return steps_ * entities_; }
  Index rank(Index t, Index n) const { return ranks_[std::size_t(t * entities_ + n)]; }
  const std::vector<Index>& ranks() const { return ranks_; }

 private:
  Index steps_;
  Index entities_;
  std::vector<Index> ranks_;
};

enum class OrderingKind {
  // Frame by frame; entities left-to-right on even frames, right-to-left on odd.
  kTimeMajorSCurve,
  // Entity by entity; time forward on even entities, backward on odd.
  kEntityMajorSCurve,
};

Ordering generate_ordering(OrderingKind kind, Index steps, Index entities);

// Per-cell binary kernel masks compiled from an Ordering. Entry (ky, kx) of
// the mask at cell i is 1 iff the cell reached through that dilated offset is
// inside the grid and ranks strictly below i (exclusive) or not above i
// (inclusive).
class LocalMaskSet {
 public:
  LocalMaskSet(Index steps, Index entities, Index kernel, Index dilation, bool inclusive,
               std::vector<std::uint8_t> masks);

  Index steps() const { return steps_; }
  Index entities() const { return entities_; }
  Index kernel() const { return kernel_; }
  Index dilation() const { return dilation_; }
  bool inclusive() const { return inclusive_; }
  bool at(Index t, Index n, Index ky, Index kx) const {
    return masks_[std::size_t(((t * entities_ + n) * kernel_ + ky) * kernel_ + kx)] != 0;
  }
  const std::uint8_t* data() const { return masks_.data(); }

  bool operator==(const LocalMaskSet&) const = default;

 private:
  Index steps_;
  Index entities_;
  Index kernel_;
  Index dilation_;
  bool inclusive_;
  std::vector<std::uint8_t> masks_;
};

LocalMaskSet build_mask_set(const Ordering& ordering, Index kernel, Index dilation, bool inclusive);

// Locally masked convolution over input [B, C_in, steps, entities] (or the
// unbatched rank-3 form): at every output cell the kernel is multiplied by
// that cell's mask.
template <typename Scalar>
Var<Scalar> lmconv(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias,
                   const LocalMaskSet& masks);

}  // namespace motionflow

#endif  // MOTIONFLOW_MASKING_HPP
