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

#ifndef MOTIONFLOW_OPS_HPP
#define MOTIONFLOW_OPS_HPP

#include "motionflow/autodiff.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace motionflow {

// Differentiable tensor operations. Image-like operands are rank 4
// [batch, channel, height, width]; the rank-3 overloads of conv2d and pono
// treat their input as a batch of one.

// Same-padded dilated cross-correlation; weight [C_out, C_in, k, k], k odd.
// `mask`, when given, holds one k*k binary kernel mask per output cell
// (height*width*k*k bytes) and the kernel is multiplied by it at that cell.
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias, int dilation = 1,
                   const std::uint8_t* mask = nullptr);

// weight [m, n]; input [n] or [batch, n]; bias [m].
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias);

// Positional normalization: at every spatial position the channel vector is
// centred and divided by (population std + epsilon).
template <typename Scalar>
Var<Scalar> pono(const Var<Scalar>& input, Scalar epsilon);

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& input, Shape shape);

// Sub-range [start, start + length) along `axis`.
template <typename Scalar>
Var<Scalar> narrow(const Var<Scalar>& input, Index axis, Index start, Index length);

template <typename Scalar>
Var<Scalar> concat(const Var<Scalar>& a, const Var<Scalar>& b, Index axis);

// Channel (axis 1) partitions. split: first half / second half.
// cross: even-index channels / odd-index channels; interleave is its inverse.
template <typename Scalar>
std::pair<Var<Scalar>, Var<Scalar>> split(const Var<Scalar>& input);
template <typename Scalar>
std::pair<Var<Scalar>, Var<Scalar>> cross(const Var<Scalar>& input);
template <typename Scalar>
Var<Scalar> interleave(const Var<Scalar>& even, const Var<Scalar>& odd);

// [B, C, H, W] -> [B, C, 1, W], mean over the height (time) axis.
template <typename Scalar>
Var<Scalar> mean_over_height(const Var<Scalar>& input);

// [G, ...] -> [G * group, ...], each leading item repeated `group` times.
template <typename Scalar>
Var<Scalar> repeat_items(const Var<Scalar>& input, Index group);

// input [G * group, C, H, W]; scale and shift [G, C]. Item i uses row i / group.
template <typename Scalar>
Var<Scalar> channel_affine(const Var<Scalar>& input, const Var<Scalar>& scale, const Var<Scalar>& shift,
                           Index group);

// input [G * group, C, H, W]; weight [G, C, C]. Every channel vector of item i
// is multiplied by weight[i / group].
template <typename Scalar>
Var<Scalar> channel_mix(const Var<Scalar>& input, const Var<Scalar>& weight, Index group);

// Each row of raw [G, C*C] read as a C x C matrix R; returns
// W = (I + strict_lower(R)) (strict_upper(R) + diag(exp(soft_clamp(diag R)))).
template <typename Scalar>
Var<Scalar> lu_compose(const Var<Scalar>& raw, Index channels, Scalar bound);
// soft_clamp(diag R) for each row, [G, C].
template <typename Scalar>
Var<Scalar> lu_log_diagonal(const Var<Scalar>& raw, Index channels, Scalar bound);

// frames [B * steps, C, H, W]: item (b, t) of the result is frame (b, t - lag)
// when t >= lag, else initial[lag - 1 - t]; initial[0] is the most recent
// context (h_0), initial[1] the one before it (h_-1). Each initial is either
// one frame shared by every sequence or [B, C, H, W] with one frame per sequence.
template <typename Scalar>
Var<Scalar> lag_frames(const Var<Scalar>& frames, const std::vector<Var<Scalar>>& initial, Index steps,
                       Index lag);

// Sum over all elements of log N(z; mu, exp(log_sigma)^2).
template <typename Scalar>
Var<Scalar> gaussian_log_prob(const Var<Scalar>& z, const Var<Scalar>& mu, const Var<Scalar>& log_sigma);
template <typename Scalar>
Var<Scalar> standard_normal_log_prob(const Var<Scalar>& z);

// Space-to-channel rearrangement of [B, D, 1, M] to [B, factor*D, 1, M/factor]:
// out[b, d*factor + j, 0, m] = in[b, d, 0, m*factor + j].
template <typename Scalar>
Var<Scalar> squeeze_frames(const Var<Scalar>& input, Index factor);

// Plain tensor versions of the reshaping bijections above.
template <typename Scalar>
Tensor<Scalar> squeeze_tensor(const Tensor<Scalar>& input, Index factor);
template <typename Scalar>
Tensor<Scalar> unsqueeze_tensor(const Tensor<Scalar>& input, Index factor);

template <typename Scalar>
Tensor<Scalar> split_tensor_first(const Tensor<Scalar>& input);
template <typename Scalar>
Tensor<Scalar> split_tensor_second(const Tensor<Scalar>& input);
template <typename Scalar>
Tensor<Scalar> concat_tensors(const Tensor<Scalar>& a, const Tensor<Scalar>& b, Index axis);
template <typename Scalar>
Tensor<Scalar> narrow_tensor(const Tensor<Scalar>& input, Index axis, Index start, Index length);
template <typename Scalar>
Tensor<Scalar> cross_even(const Tensor<Scalar>& input);
template <typename Scalar>
Tensor<Scalar> cross_odd(const Tensor<Scalar>& input);
template <typename Scalar>
Tensor<Scalar> interleave_tensors(const Tensor<Scalar>& even, const Tensor<Scalar>& odd);

}  // namespace motionflow

#endif  // MOTIONFLOW_OPS_HPP
