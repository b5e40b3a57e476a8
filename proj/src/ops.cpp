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

#include "motionflow/ops.hpp"

#include <cmath>
#include <memory>
#include <numbers>

namespace motionflow {

namespace {

struct AxisView {
  Index outer;
  Index extent;
  Index inner;
};

AxisView axis_view(const Shape& shape, Index axis) {
  if (axis < 0 || axis >= Index(shape.size())) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape));
  }
  AxisView v{1, shape[std::size_t(axis)], 1};
  for (Index i = 0; i < axis; ++i) v.outer *= shape[std::size_t(i)];
  for (Index i = axis + 1; i < Index(shape.size()); ++i) v.inner *= shape[std::size_t(i)];
  return v;
}

template <typename Scalar>
void require_rank4(const Var<Scalar>& x, const char* what) {
  require_rank(x.value(), 4, what);
}

struct ConvGeometry {
  Index batch, in_channels, height, width, out_channels, kernel, dilation;
  Index cells() const { return height * width; }
  Index rows() const { return in_channels * kernel * kernel; }
};

template <typename Scalar>
RowMajorMatrix<Scalar> im2col(const Tensor<Scalar>& x, const ConvGeometry& g, const std::uint8_t* mask) {
  const Index k = g.kernel, half = k / 2, hw = g.cells();
  RowMajorMatrix<Scalar> col = RowMajorMatrix<Scalar>::Zero(g.rows(), g.batch * hw);
  const Scalar* src = x.data();
  for (Index b = 0; b < g.batch; ++b) {
    for (Index ci = 0; ci < g.in_channels; ++ci) {
      const Scalar* plane = src + (b * g.in_channels + ci) * hw;
      for (Index ky = 0; ky < k; ++ky) {
        const Index dy = (ky - half) * g.dilation;
        for (Index kx = 0; kx < k; ++kx) {
          const Index dx = (kx - half) * g.dilation;
          const Index tap = ky * k + kx;
          Scalar* row = col.row((ci * k + ky) * k + kx).data() + b * hw;
          for (Index h = 0; h < g.height; ++h) {
            const Index hh = h + dy;
            if (hh < 0 || hh >= g.height) continue;
            for (Index w = 0; w < g.width; ++w) {
              const Index ww = w + dx;
              if (ww < 0 || ww >= g.width) continue;
              const Index cell = h * g.width + w;
              if (mask != nullptr && mask[cell * k * k + tap] == 0) continue;
              row[cell] = plane[hh * g.width + ww];
            }
          }
        }
      }
    }
  }
  return col;
}

template <typename Scalar>
void col2im(const RowMajorMatrix<Scalar>& dcol, const ConvGeometry& g, const std::uint8_t* mask, Tensor<Scalar>& gx) {
  const Index k = g.kernel, half = k / 2, hw = g.cells();
  Scalar* dst = gx.data();
  for (Index b = 0; b < g.batch; ++b) {
    for (Index ci = 0; ci < g.in_channels; ++ci) {
      Scalar* plane = dst + (b * g.in_channels + ci) * hw;
      for (Index ky = 0; ky < k; ++ky) {
        const Index dy = (ky - half) * g.dilation;
        for (Index kx = 0; kx < k; ++kx) {
          const Index dx = (kx - half) * g.dilation;
          const Index tap = ky * k + kx;
          const Scalar* row = dcol.row((ci * k + ky) * k + kx).data() + b * hw;
          for (Index h = 0; h < g.height; ++h) {
            const Index hh = h + dy;
            if (hh < 0 || hh >= g.height) continue;
            for (Index w = 0; w < g.width; ++w) {
              const Index ww = w + dx;
              if (ww < 0 || ww >= g.width) continue;
              const Index cell = h * g.width + w;
              if (mask != nullptr && mask[cell * k * k + tap] == 0) continue;
              plane[hh * g.width + ww] += row[cell];
            }
          }
        }
      }
    }
  }
}

// [B, C, HW] <-> [C, B * HW]
template <typename Scalar>
RowMajorMatrix<Scalar> to_channel_major(const Tensor<Scalar>& t, Index batch, Index channels, Index hw) {
  RowMajorMatrix<Scalar> m(channels, batch * hw);
  for (Index b = 0; b < batch; ++b) {
    m.middleCols(b * hw, hw) = t.matrix(batch * channels, hw).middleRows(b * channels, channels);
  }
  return m;
}

template <typename Scalar>
Tensor<Scalar> permutation_apply(const Tensor<Scalar>& input, const std::vector<Index>& source, Shape shape) {
  Tensor<Scalar> out(std::move(shape));
  for (Index o = 0; o < out.size(); ++o) out[o] = input[source[std::size_t(o)]];
  return out;
}

// out[o] = in[source[o]] for the squeeze rearrangement.
std::vector<Index> squeeze_source(Index batch, Index depth, Index width, Index factor) {
  const Index narrow_width = width / factor;
  std::vector<Index> source(std::size_t(batch * depth * width));
  Index o = 0;
  for (Index b = 0; b < batch; ++b)
    for (Index d = 0; d < depth; ++d)
      for (Index j = 0; j < factor; ++j)
        for (Index m = 0; m < narrow_width; ++m) source[std::size_t(o++)] = (b * depth + d) * width + m * factor + j;
  return source;
}

}  // namespace

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias, int dilation,
                   const std::uint8_t* mask) {
  if (input.rank() == 3) {
    Var<Scalar> out = conv2d(reshape(input, {1, input.dim(0), input.dim(1), input.dim(2)}), weight, bias,
                             dilation, mask);
    return reshape(out, {out.dim(1), out.dim(2), out.dim(3)});
  }
  require_rank4(input, "conv2d input");
  require_rank(weight.value(), 4, "conv2d weight");
  const Index k = weight.dim(2);
  if (weight.dim(3) != k || k % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square with odd size, got " + to_string(weight.shape()));
  }
  if (dilation < 1) throw ShapeError("conv2d: dilation must be >= 1");
  if (weight.dim(1) != input.dim(1)) {
    throw ShapeError("conv2d: weight expects " + std::to_string(weight.dim(1)) + " input channels, input " +
                     to_string(input.shape()) + " has " + std::to_string(input.dim(1)));
  }
  require_shape(bias.value(), {weight.dim(0)}, "conv2d bias");

  const ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0), k, dilation};
  const Index hw = g.cells();
  auto col = std::make_shared<RowMajorMatrix<Scalar>>(im2col(input.value(), g, mask));
  const auto w = weight.value().matrix(g.out_channels, g.rows());
  RowMajorMatrix<Scalar> out_mat = w * (*col);
  out_mat.colwise() += bias.value().array().matrix();

  Tensor<Scalar> out({g.batch, g.out_channels, g.height, g.width});
  auto out_view = out.matrix(g.batch * g.out_channels, hw);
  for (Index b = 0; b < g.batch; ++b) {
    out_view.middleRows(b * g.out_channels, g.out_channels) = out_mat.middleCols(b * hw, hw);
  }

  const std::size_t ix = input.id(), iw = weight.id(), ib = bias.id();
  return input.tape().record(
      std::move(out), {input, weight, bias}, [ix, iw, ib, g, col, mask](Tape<Scalar>& t, const Tensor<Scalar>& grad) {
        const Index hw = g.cells();
        const RowMajorMatrix<Scalar> gm = to_channel_major(grad, g.batch, g.out_channels, hw);
        if (auto* gw = t.grad_target(iw)) gw->matrix(g.out_channels, g.rows()).noalias() += gm * col->transpose();
        if (auto* gb = t.grad_target(ib)) gb->array() += gm.rowwise().sum().array();
        if (auto* gx = t.grad_target(ix)) {
          const auto w = t.value(iw).matrix(g.out_channels, g.rows());
          const RowMajorMatrix<Scalar> dcol = w.transpose() * gm;
          col2im(dcol, g, mask, *gx);
        }
      });
}

template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  require_rank(weight.value(), 2, "linear weight");
  const Index m = weight.dim(0), n = weight.dim(1);
  require_shape(bias.value(), {m}, "linear bias");
  const bool batched = input.rank() == 2;
  if (!(input.rank() == 1 || batched) || input.dim(input.rank() - 1) != n) {
    throw ShapeError("linear: input " + to_string(input.shape()) + " incompatible with weight " +
                     to_string(weight.shape()));
  }
  const Index rows = batched ? input.dim(0) : 1;
  const auto x = input.value().matrix(rows, n);
  const auto w = weight.value().matrix(m, n);
  Tensor<Scalar> out(batched ? Shape{rows, m} : Shape{m});
  auto y = out.matrix(rows, m);
  y.noalias() = x * w.transpose();
  y.rowwise() += bias.value().array().matrix().transpose();

  const std::size_t ix = input.id(), iw = weight.id(), ib = bias.id();
  return input.tape().record(std::move(out), {input, weight, bias},
                             [ix, iw, ib, rows, m, n](Tape<Scalar>& t, const Tensor<Scalar>& grad) {
                               const auto g = grad.matrix(rows, m);
                               if (auto* gx = t.grad_target(ix)) {
                                 gx->matrix(rows, n).noalias() += g * t.value(iw).matrix(m, n);
                               }
                               if (auto* gw = t.grad_target(iw)) {
                                 gw->matrix(m, n).noalias() += g.transpose() * t.value(ix).matrix(rows, n);
                               }
                               if (auto* gb = t.grad_target(ib)) gb->array() += g.colwise().sum().transpose().array();
                             });
}

template <typename Scalar>
Var<Scalar> pono(const Var<Scalar>& input, Scalar epsilon) {
  if (input.rank() == 3) {
    Var<Scalar> out = pono(reshape(input, {1, input.dim(0), input.dim(1), input.dim(2)}), epsilon);
    return reshape(out, input.shape());
  }
  require_rank4(input, "pono input");
  const Index batch = input.dim(0), channels = input.dim(1), hw = input.dim(2) * input.dim(3);
  // Per (batch, position): std of the channel vector.
  auto stds = std::make_shared<Tensor<Scalar>>(Shape{batch, hw});
  Tensor<Scalar> out(input.shape());
  const auto x = input.value().matrix(batch * channels, hw);
  auto y = out.matrix(batch * channels, hw);
  for (Index b = 0; b < batch; ++b) {
    const auto xb = x.middleRows(b * channels, channels);
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> mean = xb.colwise().mean().array();
    const RowMajorMatrix<Scalar> centered = (xb.array().rowwise() - mean).matrix();
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> sd =
        (centered.array().square().colwise().sum() / Scalar(channels)).sqrt();
    stds->matrix(batch, hw).row(b) = sd.matrix();
    y.middleRows(b * channels, channels) = (centered.array().rowwise() / (sd + epsilon)).matrix();
  }

  const std::size_t ix = input.id();
  const std::size_t io = input.tape().size();
  return input.tape().record(
      std::move(out), {input}, [ix, io, stds, batch, channels, hw, epsilon](Tape<Scalar>& t, const Tensor<Scalar>& grad) {
        auto* gx = t.grad_target(ix);
        if (gx == nullptr) return;
        const auto g = grad.matrix(batch * channels, hw);
        const auto y = t.value(io).matrix(batch * channels, hw);
        auto dx = gx->matrix(batch * channels, hw);
        for (Index b = 0; b < batch; ++b) {
          const auto gb = g.middleRows(b * channels, channels).array();
          const auto yb = y.middleRows(b * channels, channels).array();
          const Eigen::Array<Scalar, 1, Eigen::Dynamic> sd = stds->matrix(batch, hw).row(b).array();
          const Eigen::Array<Scalar, 1, Eigen::Dynamic> denom = sd + epsilon;
          const Eigen::Array<Scalar, 1, Eigen::Dynamic> gmean = gb.colwise().mean();
          // centered = y * denom; d std / d x_c = centered_c / (C * std), zero where std == 0.
          const Eigen::Array<Scalar, 1, Eigen::Dynamic> gy = (gb * yb).colwise().sum();
          const Eigen::Array<Scalar, 1, Eigen::Dynamic> coef =
              (sd > Scalar(0)).select(gy / (denom * sd * Scalar(channels)), Scalar(0));
          dx.middleRows(b * channels, channels).array() +=
              (gb.rowwise() - gmean).rowwise() / denom - (yb.rowwise() * denom).rowwise() * coef;
        }
      });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& input, Shape shape) {
  const std::size_t ix = input.id();
  return input.tape().record(input.value().reshaped(std::move(shape)), {input},
                             [ix](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                               if (auto* gx = t.grad_target(ix)) gx->array() += g.array();
                             });
}

template <typename Scalar>
Tensor<Scalar> narrow_tensor(const Tensor<Scalar>& input, Index axis, Index start, Index length) {
  const AxisView v = axis_view(input.shape(), axis);
  if (start < 0 || length <= 0 || start + length > v.extent) {
    throw ShapeError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside axis of extent " + std::to_string(v.extent));
  }
  Shape shape = input.shape();
  shape[std::size_t(axis)] = length;
  Tensor<Scalar> out(shape);
  for (Index o = 0; o < v.outer; ++o) {
    out.array().segment(o * length * v.inner, length * v.inner) =
        input.array().segment((o * v.extent + start) * v.inner, length * v.inner);
  }
  return out;
}

template <typename Scalar>
Var<Scalar> narrow(const Var<Scalar>& input, Index axis, Index start, Index length) {
  const AxisView v = axis_view(input.shape(), axis);
  const std::size_t ix = input.id();
  return input.tape().record(narrow_tensor(input.value(), axis, start, length), {input},
                             [ix, v, start, length](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                               auto* gx = t.grad_target(ix);
                               if (gx == nullptr) return;
                               for (Index o = 0; o < v.outer; ++o) {
                                 gx->array().segment((o * v.extent + start) * v.inner, length * v.inner) +=
                                     g.array().segment(o * length * v.inner, length * v.inner);
                               }
                             });
}

template <typename Scalar>
Tensor<Scalar> concat_tensors(const Tensor<Scalar>& a, const Tensor<Scalar>& b, Index axis) {
  const AxisView va = axis_view(a.shape(), axis), vb = axis_view(b.shape(), axis);
  Shape check_a = a.shape(), check_b = b.shape();
  check_a[std::size_t(axis)] = check_b[std::size_t(axis)] = 0;
  if (check_a != check_b) {
    throw ShapeError("concat: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                     " differ off axis " + std::to_string(axis));
  }
  Shape shape = a.shape();
  shape[std::size_t(axis)] = va.extent + vb.extent;
  Tensor<Scalar> out(shape);
  const Index sa = va.extent * va.inner, sb = vb.extent * vb.inner;
  for (Index o = 0; o < va.outer; ++o) {
    out.array().segment(o * (sa + sb), sa) = a.array().segment(o * sa, sa);
    out.array().segment(o * (sa + sb) + sa, sb) = b.array().segment(o * sb, sb);
  }
  return out;
}

template <typename Scalar>
Var<Scalar> concat(const Var<Scalar>& a, const Var<Scalar>& b, Index axis) {
  const AxisView va = axis_view(a.shape(), axis), vb = axis_view(b.shape(), axis);
  const Index sa = va.extent * va.inner, sb = vb.extent * vb.inner, outer = va.outer;
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(concat_tensors(a.value(), b.value(), axis), {a, b},
                         [ia, ib, sa, sb, outer](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           auto* ga = t.grad_target(ia);
                           auto* gb = t.grad_target(ib);
                           for (Index o = 0; o < outer; ++o) {
                             if (ga) ga->array().segment(o * sa, sa) += g.array().segment(o * (sa + sb), sa);
                             if (gb) gb->array().segment(o * sb, sb) += g.array().segment(o * (sa + sb) + sa, sb);
                           }
                         });
}

template <typename Scalar>
std::pair<Var<Scalar>, Var<Scalar>> split(const Var<Scalar>& input) {
  const Index channels = input.dim(1);
  if (channels % 2 != 0) throw ShapeError("split: channel count must be even, got " + to_string(input.shape()));
  return {narrow(input, 1, 0, channels / 2), narrow(input, 1, channels / 2, channels / 2)};
}

template <typename Scalar>
Tensor<Scalar> split_tensor_first(const Tensor<Scalar>& input) {
  return narrow_tensor(input, 1, 0, input.dim(1) / 2);
}

template <typename Scalar>
Tensor<Scalar> split_tensor_second(const Tensor<Scalar>& input) {
  return narrow_tensor(input, 1, input.dim(1) / 2, input.dim(1) / 2);
}

namespace {

template <typename Scalar>
Tensor<Scalar> take_parity(const Tensor<Scalar>& input, Index parity) {
  const AxisView v = axis_view(input.shape(), 1);
  if (v.extent % 2 != 0) throw ShapeError("cross: channel count must be even, got " + to_string(input.shape()));
  Shape shape = input.shape();
  shape[1] = v.extent / 2;
  Tensor<Scalar> out(shape);
  for (Index o = 0; o < v.outer; ++o)
    for (Index c = 0; c < v.extent / 2; ++c)
      out.array().segment((o * (v.extent / 2) + c) * v.inner, v.inner) =
          input.array().segment((o * v.extent + 2 * c + parity) * v.inner, v.inner);
  return out;
}

template <typename Scalar>
Var<Scalar> parity_var(const Var<Scalar>& input, Index parity) {
  const AxisView v = axis_view(input.shape(), 1);
  const std::size_t ix = input.id();
  return input.tape().record(take_parity(input.value(), parity), {input},
                             [ix, v, parity](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                               auto* gx = t.grad_target(ix);
                               if (gx == nullptr) return;
                               for (Index o = 0; o < v.outer; ++o)
                                 for (Index c = 0; c < v.extent / 2; ++c)
                                   gx->array().segment((o * v.extent + 2 * c + parity) * v.inner, v.inner) +=
                                       g.array().segment((o * (v.extent / 2) + c) * v.inner, v.inner);
                             });
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> cross_even(const Tensor<Scalar>& input) {
  return take_parity(input, 0);
}

template <typename Scalar>
Tensor<Scalar> cross_odd(const Tensor<Scalar>& input) {
  return take_parity(input, 1);
}

template <typename Scalar>
std::pair<Var<Scalar>, Var<Scalar>> cross(const Var<Scalar>& input) {
  return {parity_var(input, 0), parity_var(input, 1)};
}

template <typename Scalar>
Tensor<Scalar> interleave_tensors(const Tensor<Scalar>& even, const Tensor<Scalar>& odd) {
  if (even.shape() != odd.shape()) throw ShapeError("interleave: operand shapes differ");
  const AxisView v = axis_view(even.shape(), 1);
  Shape shape = even.shape();
  shape[1] = 2 * v.extent;
  Tensor<Scalar> out(shape);
  for (Index o = 0; o < v.outer; ++o)
    for (Index c = 0; c < v.extent; ++c) {
      out.array().segment((o * 2 * v.extent + 2 * c) * v.inner, v.inner) =
          even.array().segment((o * v.extent + c) * v.inner, v.inner);
      out.array().segment((o * 2 * v.extent + 2 * c + 1) * v.inner, v.inner) =
          odd.array().segment((o * v.extent + c) * v.inner, v.inner);
    }
  return out;
}

template <typename Scalar>
Var<Scalar> interleave(const Var<Scalar>& even, const Var<Scalar>& odd) {
  const AxisView v = axis_view(even.shape(), 1);
  const std::size_t ie = even.id(), io = odd.id();
  return even.tape().record(interleave_tensors(even.value(), odd.value()), {even, odd},
                            [ie, io, v](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                              auto* ge = t.grad_target(ie);
                              auto* go = t.grad_target(io);
                              for (Index o = 0; o < v.outer; ++o)
                                for (Index c = 0; c < v.extent; ++c) {
                                  if (ge) {
                                    ge->array().segment((o * v.extent + c) * v.inner, v.inner) +=
                                        g.array().segment((o * 2 * v.extent + 2 * c) * v.inner, v.inner);
                                  }
                                  if (go) {
                                    go->array().segment((o * v.extent + c) * v.inner, v.inner) +=
                                        g.array().segment((o * 2 * v.extent + 2 * c + 1) * v.inner, v.inner);
                                  }
                                }
                            });
}

template <typename Scalar>
Var<Scalar> mean_over_height(const Var<Scalar>& input) {
  require_rank4(input, "mean_over_height input");
  const Index planes = input.dim(0) * input.dim(1), height = input.dim(2), width = input.dim(3);
  Tensor<Scalar> out({input.dim(0), input.dim(1), 1, width});
  const auto x = input.value().matrix(planes * height, width);
  auto y = out.matrix(planes, width);
  for (Index p = 0; p < planes; ++p) y.row(p) = x.middleRows(p * height, height).colwise().mean();
  const std::size_t ix = input.id();
  return input.tape().record(std::move(out), {input},
                             [ix, planes, height, width](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                               auto* gx = t.grad_target(ix);
                               if (gx == nullptr) return;
                               auto dx = gx->matrix(planes * height, width);
                               const auto gy = g.matrix(planes, width);
                               for (Index p = 0; p < planes; ++p)
                                 dx.middleRows(p * height, height).rowwise() += gy.row(p) / Scalar(height);
                             });
}

template <typename Scalar>
Var<Scalar> repeat_items(const Var<Scalar>& input, Index group) {
  const Index items = input.dim(0), item_size = input.value().size() / items;
  Shape shape = input.shape();
  shape[0] = items * group;
  Tensor<Scalar> out(shape);
  for (Index i = 0; i < items * group; ++i)
    out.array().segment(i * item_size, item_size) = input.value().array().segment((i / group) * item_size, item_size);
  const std::size_t ix = input.id();
  return input.tape().record(std::move(out), {input},
                             [ix, items, group, item_size](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                               auto* gx = t.grad_target(ix);
                               if (gx == nullptr) return;
                               for (Index i = 0; i < items * group; ++i)
                                 gx->array().segment((i / group) * item_size, item_size) +=
                                     g.array().segment(i * item_size, item_size);
                             });
}

template <typename Scalar>
Var<Scalar> channel_affine(const Var<Scalar>& input, const Var<Scalar>& scale, const Var<Scalar>& shift, Index group) {
  require_rank4(input, "channel_affine input");
  const Index items = input.dim(0), channels = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (items % group != 0) throw ShapeError("channel_affine: batch not divisible by group");
  const Shape param_shape{items / group, channels};
  require_shape(scale.value(), param_shape, "channel_affine scale");
  require_shape(shift.value(), param_shape, "channel_affine shift");
  Tensor<Scalar> out(input.shape());
  const auto x = input.value().matrix(items * channels, hw);
  auto y = out.matrix(items * channels, hw);
  for (Index i = 0; i < items; ++i)
    for (Index c = 0; c < channels; ++c) {
      const Index row = i * channels + c, p = (i / group) * channels + c;
      // Accumulated in double and rounded once, which keeps 32-bit flows invertible to a few ulps.
      y.row(row) = (x.row(row).array().template cast<double>() * double(scale.value()[p]) + double(shift.value()[p]))
                       .template cast<Scalar>()
                       .matrix();
    }
  const std::size_t ix = input.id(), is = scale.id(), ib = shift.id();
  return input.tape().record(
      std::move(out), {input, scale, shift},
      [ix, is, ib, items, channels, hw, group](Tape<Scalar>& t, const Tensor<Scalar>& g) {
        const auto gm = g.matrix(items * channels, hw);
        auto* gx = t.grad_target(ix);
        auto* gs = t.grad_target(is);
        auto* gb = t.grad_target(ib);
        const auto x = t.value(ix).matrix(items * channels, hw);
        for (Index i = 0; i < items; ++i)
          for (Index c = 0; c < channels; ++c) {
            const Index row = i * channels + c, p = (i / group) * channels + c;
            if (gx) gx->matrix(items * channels, hw).row(row) += gm.row(row) * t.value(is)[p];
            if (gs) (*gs)[p] += gm.row(row).dot(x.row(row));
            if (gb) (*gb)[p] += gm.row(row).sum();
          }
      });
}

template <typename Scalar>
Var<Scalar> channel_mix(const Var<Scalar>& input, const Var<Scalar>& weight, Index group) {
  require_rank4(input, "channel_mix input");
  const Index items = input.dim(0), channels = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (items % group != 0) throw ShapeError("channel_mix: batch not divisible by group");
  require_shape(weight.value(), {items / group, channels, channels}, "channel_mix weight");
  Tensor<Scalar> out(input.shape());
  const auto x = input.value().matrix(items * channels, hw);
  const auto w = weight.value().matrix((items / group) * channels, channels);
  auto y = out.matrix(items * channels, hw);
  for (Index i = 0; i < items; ++i) {
    y.middleRows(i * channels, channels) = (w.middleRows((i / group) * channels, channels).template cast<double>() *
                                            x.middleRows(i * channels, channels).template cast<double>())
                                               .template cast<Scalar>();
  }
  const std::size_t ix = input.id(), iw = weight.id();
  return input.tape().record(
      std::move(out), {input, weight}, [ix, iw, items, channels, hw, group](Tape<Scalar>& t, const Tensor<Scalar>& g) {
        const auto gm = g.matrix(items * channels, hw);
        const auto x = t.value(ix).matrix(items * channels, hw);
        const auto w = t.value(iw).matrix((items / group) * channels, channels);
        auto* gx = t.grad_target(ix);
        auto* gw = t.grad_target(iw);
        for (Index i = 0; i < items; ++i) {
          const auto gi = gm.middleRows(i * channels, channels);
          if (gx) {
            gx->matrix(items * channels, hw).middleRows(i * channels, channels).noalias() +=
                w.middleRows((i / group) * channels, channels).transpose() * gi;
          }
          if (gw) {
            gw->matrix((items / group) * channels, channels).middleRows((i / group) * channels, channels).noalias() +=
                gi * x.middleRows(i * channels, channels).transpose();
          }
        }
      });
}

template <typename Scalar>
Var<Scalar> lu_compose(const Var<Scalar>& raw, Index channels, Scalar bound) {
  require_rank(raw.value(), 2, "lu_compose raw");
  const Index items = raw.dim(0), c = channels;
  if (raw.dim(1) != c * c) throw ShapeError("lu_compose: raw row length must be channels^2");
  using Mat = RowMajorMatrix<Scalar>;
  Tensor<Scalar> out({items, c, c});
  for (Index i = 0; i < items; ++i) {
    const Eigen::Map<const Mat> r(raw.value().data() + i * c * c, c, c);
    Mat lower = r.template triangularView<Eigen::StrictlyLower>();
    lower.diagonal().setOnes();
    Mat upper = r.template triangularView<Eigen::StrictlyUpper>();
    upper.diagonal() = (bound * (r.diagonal().array() / bound).tanh()).exp().matrix();
    Eigen::Map<Mat>(out.data() + i * c * c, c, c).noalias() = lower * upper;
  }
  const std::size_t ir = raw.id();
  return raw.tape().record(std::move(out), {raw}, [ir, items, c, bound](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    auto* gr = t.grad_target(ir);
    if (gr == nullptr) return;
    for (Index i = 0; i < items; ++i) {
      const Eigen::Map<const Mat> r(t.value(ir).data() + i * c * c, c, c);
      const Eigen::Map<const Mat> gw(g.data() + i * c * c, c, c);
      Eigen::Map<Mat> dr(gr->data() + i * c * c, c, c);
      Mat lower = r.template triangularView<Eigen::StrictlyLower>();
      lower.diagonal().setOnes();
      const auto log_d = (bound * (r.diagonal().array() / bound).tanh()).eval();
      Mat upper = r.template triangularView<Eigen::StrictlyUpper>();
      upper.diagonal() = log_d.exp().matrix();
      const Mat g_lower = gw * upper.transpose();
      const Mat g_upper = lower.transpose() * gw;
      dr += Mat(g_lower.template triangularView<Eigen::StrictlyLower>());
      dr += Mat(g_upper.template triangularView<Eigen::StrictlyUpper>());
      dr.diagonal().array() += g_upper.diagonal().array() * log_d.exp() * (Scalar(1) - (log_d / bound).square());
    }
  });
}

template <typename Scalar>
Var<Scalar> lu_log_diagonal(const Var<Scalar>& raw, Index channels, Scalar bound) {
  require_rank(raw.value(), 2, "lu_log_diagonal raw");
  const Index items = raw.dim(0), c = channels;
  if (raw.dim(1) != c * c) throw ShapeError("lu_log_diagonal: raw row length must be channels^2");
  Tensor<Scalar> out({items, c});
  for (Index i = 0; i < items; ++i)
    for (Index k = 0; k < c; ++k) out[i * c + k] = bound * std::tanh(raw.value()[i * c * c + k * c + k] / bound);
  const std::size_t ir = raw.id(), io = raw.tape().size();
  return raw.tape().record(std::move(out), {raw}, [ir, io, items, c, bound](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    auto* gr = t.grad_target(ir);
    if (gr == nullptr) return;
    for (Index i = 0; i < items; ++i)
      for (Index k = 0; k < c; ++k) {
        const Scalar d = t.value(io)[i * c + k] / bound;
        (*gr)[i * c * c + k * c + k] += g[i * c + k] * (Scalar(1) - d * d);
      }
  });
}

template <typename Scalar>
Var<Scalar> lag_frames(const Var<Scalar>& frames, const std::vector<Var<Scalar>>& initial, Index steps, Index lag) {
  require_rank4(frames, "lag_frames frames");
  if (Index(initial.size()) < lag) throw ShapeError("lag_frames: not enough initial contexts for lag");
  const Index items = frames.dim(0), frame_size = frames.value().size() / items;
  if (items % steps != 0) throw ShapeError("lag_frames: batch not divisible by step count");
  const Index groups = items / steps;
  std::vector<bool> batched;
  for (const auto& init : initial) {
    const Index n = init.value().size();
    if (n != frame_size && n != groups * frame_size) throw ShapeError("lag_frames: initial context shape mismatch");
    batched.push_back(n != frame_size || groups == 1);
  }
  Tensor<Scalar> out(frames.shape());
  for (Index i = 0; i < items; ++i) {
    const Index t = i % steps;
    auto dst = out.array().segment(i * frame_size, frame_size);
    if (t >= lag) {
      dst = frames.value().array().segment((i - lag) * frame_size, frame_size);
    } else {
      const std::size_t k = std::size_t(lag - 1 - t);
      dst = initial[k].value().array().segment(batched[k] ? (i / steps) * frame_size : 0, frame_size);
    }
  }
  std::vector<Var<Scalar>> inputs{frames};
  std::vector<std::size_t> init_ids;
  for (const auto& init : initial) {
    inputs.push_back(init);
    init_ids.push_back(init.id());
  }
  const std::size_t ix = frames.id();
  return frames.tape().record(
      std::move(out), inputs, [ix, init_ids, batched, items, frame_size, steps, lag](Tape<Scalar>& t, const Tensor<Scalar>& g) {
        auto* gx = t.grad_target(ix);
        for (Index i = 0; i < items; ++i) {
          const Index step = i % steps;
          const auto src = g.array().segment(i * frame_size, frame_size);
          if (step >= lag) {
            if (gx) gx->array().segment((i - lag) * frame_size, frame_size) += src;
          } else {
            const std::size_t k = std::size_t(lag - 1 - step);
            if (auto* gi = t.grad_target(init_ids[k])) {
              gi->array().segment(batched[k] ? (i / steps) * frame_size : 0, frame_size) += src;
            }
          }
        }
      });
}

template <typename Scalar>
Var<Scalar> gaussian_log_prob(const Var<Scalar>& z, const Var<Scalar>& mu, const Var<Scalar>& log_sigma) {
  if (z.shape() != mu.shape() || z.shape() != log_sigma.shape()) {
    throw ShapeError("gaussian_log_prob: shapes of z, mu and log_sigma must agree");
  }
  const Scalar half_log_2pi = Scalar(0.5 * std::log(2.0 * std::numbers::pi));
  const auto r = ((z.value().array() - mu.value().array()) * (-log_sigma.value().array()).exp()).eval();
  Tensor<Scalar> out({1});
  out[0] = (Scalar(-0.5) * r.square() - log_sigma.value().array() - half_log_2pi).sum();
  const std::size_t iz = z.id(), im = mu.id(), is = log_sigma.id();
  return z.tape().record(std::move(out), {z, mu, log_sigma}, [iz, im, is](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const auto inv_sigma = (-t.value(is).array()).exp();
    const auto r = ((t.value(iz).array() - t.value(im).array()) * inv_sigma).eval();
    if (auto* gz = t.grad_target(iz)) gz->array() -= g[0] * r * inv_sigma;
    if (auto* gm = t.grad_target(im)) gm->array() += g[0] * r * inv_sigma;
    if (auto* gs = t.grad_target(is)) gs->array() += g[0] * (r.square() - Scalar(1));
  });
}

template <typename Scalar>
Var<Scalar> standard_normal_log_prob(const Var<Scalar>& z) {
  const Scalar half_log_2pi = Scalar(0.5 * std::log(2.0 * std::numbers::pi));
  Tensor<Scalar> out({1});
  out[0] = (Scalar(-0.5) * z.value().array().square() - half_log_2pi).sum();
  const std::size_t iz = z.id();
  return z.tape().record(std::move(out), {z}, [iz](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (auto* gz = t.grad_target(iz)) gz->array() -= g[0] * t.value(iz).array();
  });
}

namespace {

struct SqueezeDims {
  Index batch, depth, width;
};

SqueezeDims squeeze_dims(const Shape& shape, Index factor) {
  const bool batched = shape.size() == 4;
  if (!(shape.size() == 3 || batched) || shape[batched ? 2 : 1] != 1) {
    throw ShapeError("squeeze expects [D,1,M] or [B,D,1,M], got " + to_string(shape));
  }
  const Index width = shape.back();
  if (factor < 1 || width % factor != 0) {
    throw ShapeError("squeeze: width " + std::to_string(width) + " not divisible by factor " + std::to_string(factor));
  }
  return {batched ? shape[0] : 1, shape[batched ? 1 : 0], width};
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> squeeze_tensor(const Tensor<Scalar>& input, Index factor) {
  const SqueezeDims d = squeeze_dims(input.shape(), factor);
  Shape shape = input.rank() == 4 ? Shape{d.batch, d.depth * factor, 1, d.width / factor}
                                  : Shape{d.depth * factor, 1, d.width / factor};
  return permutation_apply(input, squeeze_source(d.batch, d.depth, d.width, factor), std::move(shape));
}

template <typename Scalar>
Tensor<Scalar> unsqueeze_tensor(const Tensor<Scalar>& input, Index factor) {
  const bool batched = input.rank() == 4;
  if (!(input.rank() == 3 || batched) || input.dim(batched ? 1 : 0) % factor != 0) {
    throw ShapeError("unsqueeze: channel count not divisible by factor in " + to_string(input.shape()));
  }
  const Index batch = batched ? input.dim(0) : 1;
  const Index depth = input.dim(batched ? 1 : 0) / factor, width = input.shape().back() * factor;
  const auto source = squeeze_source(batch, depth, width, factor);
  Shape shape = batched ? Shape{batch, depth, 1, width} : Shape{depth, 1, width};
  Tensor<Scalar> out(std::move(shape));
  for (Index o = 0; o < input.size(); ++o) out[source[std::size_t(o)]] = input[o];
  return out;
}

template <typename Scalar>
Var<Scalar> squeeze_frames(const Var<Scalar>& input, Index factor) {
  const SqueezeDims d = squeeze_dims(input.shape(), factor);
  auto source = std::make_shared<std::vector<Index>>(squeeze_source(d.batch, d.depth, d.width, factor));
  const std::size_t ix = input.id();
  return input.tape().record(squeeze_tensor(input.value(), factor), {input},
                             [ix, source](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                               auto* gx = t.grad_target(ix);
                               if (gx == nullptr) return;
                               for (Index o = 0; o < g.size(); ++o) (*gx)[(*source)[std::size_t(o)]] += g[o];
                             });
}

#define MOTIONFLOW_INSTANTIATE(S)                                                                       \
  template Var<S> conv2d(const Var<S>&, const Var<S>&, const Var<S>&, int, const std::uint8_t*);        \
  template Var<S> linear(const Var<S>&, const Var<S>&, const Var<S>&);                                  \
  template Var<S> pono(const Var<S>&, S);                                                               \
  template Var<S> reshape(const Var<S>&, Shape);                                                        \
  template Var<S> narrow(const Var<S>&, Index, Index, Index);                                           \
  template Var<S> concat(const Var<S>&, const Var<S>&, Index);                                          \
  template std::pair<Var<S>, Var<S>> split(const Var<S>&);                                              \
  template std::pair<Var<S>, Var<S>> cross(const Var<S>&);                                              \
  template Var<S> interleave(const Var<S>&, const Var<S>&);                                             \
  template Var<S> mean_over_height(const Var<S>&);                                                      \
  template Var<S> repeat_items(const Var<S>&, Index);                                                   \
  template Var<S> channel_affine(const Var<S>&, const Var<S>&, const Var<S>&, Index);                   \
  template Var<S> channel_mix(const Var<S>&, const Var<S>&, Index);                                     \
  template Var<S> lu_compose(const Var<S>&, Index, S);                                                  \
  template Var<S> lu_log_diagonal(const Var<S>&, Index, S);                                             \
  template Var<S> lag_frames(const Var<S>&, const std::vector<Var<S>>&, Index, Index);                  \
  template Var<S> gaussian_log_prob(const Var<S>&, const Var<S>&, const Var<S>&);                       \
  template Var<S> standard_normal_log_prob(const Var<S>&);                                              \
  template Var<S> squeeze_frames(const Var<S>&, Index);                                                 \
  template Tensor<S> squeeze_tensor(const Tensor<S>&, Index);                                           \
  template Tensor<S> unsqueeze_tensor(const Tensor<S>&, Index);                                         \
  template Tensor<S> split_tensor_first(const Tensor<S>&);                                              \
  template Tensor<S> split_tensor_second(const Tensor<S>&);                                             \
  template Tensor<S> concat_tensors(const Tensor<S>&, const Tensor<S>&, Index);                         \
  template Tensor<S> narrow_tensor(const Tensor<S>&, Index, Index, Index);                              \
  template Tensor<S> cross_even(const Tensor<S>&);                                                      \
  template Tensor<S> cross_odd(const Tensor<S>&);                                                       \
  template Tensor<S> interleave_tensors(const Tensor<S>&, const Tensor<S>&);

MOTIONFLOW_INSTANTIATE(float)
MOTIONFLOW_INSTANTIATE(double)

#undef MOTIONFLOW_INSTANTIATE

}  // namespace motionflow
